//! HTTP client for an external language-model trajectory planner.
//!
//! Request: `POST {instruction, start: [x,y,z], object_aabb: {min, max}}`.
//! Reply: `{waypoints: [[x,y,z], ...], duration_s, motion_prompt}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::constraints::Aabb;
use crate::error::{Error, Result};

pub const ENDPOINT_VAR: &str = "MOTIONOPT_PLANNER_URL";
pub const TOKEN_VAR: &str = "MOTIONOPT_PLANNER_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRequest<'a> {
    pub instruction: &'a str,
    pub start: [f64; 3],
    pub object_aabb: Option<Aabb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmReply {
    pub waypoints: Vec<[f64; 3]>,
    pub duration_s: f64,
    pub motion_prompt: String,
}

impl LlmReply {
    /// Parse and check a reply body.
    pub fn from_json(body: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Loose {
            waypoints: Option<Vec<[f64; 3]>>,
            duration_s: Option<f64>,
            motion_prompt: Option<String>,
        }
        let loose: Loose = serde_json::from_str(body).map_err(|e| Error::SchemaError(e.to_string()))?;
        let reply = LlmReply {
            waypoints: loose.waypoints.ok_or_else(|| Error::SchemaError("missing field `waypoints`".into()))?,
            duration_s: loose
                .duration_s
                .ok_or_else(|| Error::SchemaError("missing field `duration_s`".into()))?,
            motion_prompt: loose
                .motion_prompt
                .ok_or_else(|| Error::SchemaError("missing field `motion_prompt`".into()))?,
        };
        if reply.waypoints.len() < 2 {
            return Err(Error::SchemaError(format!(
                "need at least two waypoints, got {}",
                reply.waypoints.len()
            )));
        }
        if reply.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::SchemaError("waypoints must be finite".into()));
        }
        if !(reply.duration_s.is_finite() && reply.duration_s > 0.0) {
            return Err(Error::SchemaError(format!("duration_s must be > 0, got {}", reply.duration_s)));
        }
        Ok(reply)
    }
}

/// Where and how to reach the planner service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl Endpoint {
    /// Read the endpoint from the environment, if configured.
    pub fn from_env(timeout: Duration) -> Option<Self> {
        let url = std::env::var(ENDPOINT_VAR).ok().filter(|u| !u.is_empty())?;
        Some(Endpoint {
            url,
            token: std::env::var(TOKEN_VAR).ok().filter(|t| !t.is_empty()),
            timeout,
        })
    }
}

/// One blocking request to the planner service.
pub fn llm_plan(request: &PlanRequest, endpoint: &Endpoint) -> Result<LlmReply> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(endpoint.timeout))
        .build()
        .into();
    let mut call = agent.post(&endpoint.url);
    if let Some(token) = &endpoint.token {
        call = call.header("Authorization", &format!("Bearer {token}"));
    }
    let mut response = call
        .send_json(request)
        .map_err(|e| Error::PlannerUnavailable(e.to_string()))?;
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| Error::PlannerUnavailable(e.to_string()))?;
    LlmReply::from_json(&body)
}
