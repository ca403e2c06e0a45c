//! Coarse root trajectories: an external language-model planner when one is
//! reachable, an obstacle-aware fallback otherwise, and constant-speed
//! resampling to one root position per frame.

pub mod fallback;
pub mod interpolate;
pub mod llm;

use serde::{Deserialize, Serialize};

use crate::constraints::{Aabb, SceneObject};
use crate::error::{Error, Result};
use crate::motion::rotation::yaw_rot6d;
use crate::motion::{Frame, MotionSequence};

pub use fallback::{plan_fallback, sample_polyline, Rect, VERIFY_SPACING};
pub use interpolate::{interpolate, path_length};
pub use llm::{llm_plan, Endpoint, LlmReply, PlanRequest};

/// Frames needed by the optimizer's jerk window.
pub const MIN_FRAMES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Seconds from the start of the motion.
    pub time: f64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub instruction: String,
    pub source: PlanSource,
    /// Why the external planner was not used, for fallback plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    /// Motion description with the spatial content removed.
    pub motion_prompt: String,
    pub fps: f64,
    pub waypoints: Vec<Waypoint>,
    /// Root position per frame.
    pub frames: Vec<[f64; 3]>,
}

impl TrajectoryPlan {
    /// Time-stamp `positions` at constant speed over `duration_s` and resample
    /// to `round(duration_s * fps) + 1` frames (at least [`MIN_FRAMES`]).
    pub fn from_path(
        positions: &[[f64; 3]],
        duration_s: f64,
        fps: f64,
        instruction: impl Into<String>,
        motion_prompt: impl Into<String>,
        source: PlanSource,
    ) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::TooFewWaypoints(positions.len()));
        }
        if !(fps.is_finite() && fps > 0.0) || !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fps and duration must be > 0, got {fps} and {duration_s}"
            )));
        }
        let total = path_length(positions);
        let mut travelled = 0.0;
        let waypoints = positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i > 0 {
                    travelled += path_length(&positions[i - 1..=i]);
                }
                let fraction = if total > 0.0 {
                    travelled / total
                } else {
                    i as f64 / (positions.len() - 1) as f64
                };
                Waypoint {
                    time: duration_s * fraction,
                    position: *p,
                }
            })
            .collect();
        let n = ((duration_s * fps).round() as usize + 1).max(MIN_FRAMES);
        let plan = TrajectoryPlan {
            instruction: instruction.into(),
            source,
            fallback_reason: None,
            motion_prompt: motion_prompt.into(),
            fps,
            waypoints,
            frames: interpolate(positions, n)?,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.waypoints.iter().map(|w| w.position).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::TooFewWaypoints(self.waypoints.len()));
        }
        if self.frames.len() < 2 {
            return Err(Error::TooFewFrames {
                need: 2,
                got: self.frames.len(),
            });
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidConfig(format!("fps must be > 0, got {}", self.fps)));
        }
        if self.waypoints.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::InvalidConfig("waypoint times must be strictly increasing".into()));
        }
        let close = |a: &[f64; 3], b: &[f64; 3]| (0..3).all(|k| (a[k] - b[k]).abs() <= 1e-9);
        let (first, last) = (&self.waypoints[0], self.waypoints.last().unwrap());
        if !close(&self.frames[0], &first.position) || !close(self.frames.last().unwrap(), &last.position) {
            return Err(Error::InvalidConfig("per-frame trajectory endpoints differ from waypoints".into()));
        }
        if self.frames.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("per-frame trajectory has non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSettings {
    pub instruction: String,
    pub start: [f64; 3],
    /// Target for the fallback planner.
    pub goal: [f64; 3],
    pub clearance: f64,
    pub fps: f64,
    /// Walking speed used to time fallback paths, in m/s.
    pub speed: f64,
    /// External planner; `None` plans offline.
    pub endpoint: Option<Endpoint>,
}

/// Bounding box of every object, sent to the external planner.
fn scene_box(objects: &[SceneObject]) -> Option<Aabb> {
    objects.iter().map(|o| *o.aabb()).reduce(|a, b| Aabb {
        min: std::array::from_fn(|k| a.min[k].min(b.min[k])),
        max: std::array::from_fn(|k| a.max[k].max(b.max[k])),
    })
}

/// Plan with the external service if configured, falling back to
/// [`plan_fallback`] on any failure.
pub fn plan(settings: &PlanSettings, objects: &[SceneObject]) -> Result<TrajectoryPlan> {
    let reason = match &settings.endpoint {
        None => "offline".to_string(),
        Some(endpoint) => {
            let request = PlanRequest {
                instruction: &settings.instruction,
                start: settings.start,
                object_aabb: scene_box(objects),
            };
            match llm_plan(&request, endpoint).and_then(|reply| {
                TrajectoryPlan::from_path(
                    &reply.waypoints,
                    reply.duration_s,
                    settings.fps,
                    settings.instruction.clone(),
                    reply.motion_prompt,
                    PlanSource::Llm,
                )
            }) {
                Ok(plan) => return Ok(plan),
                Err(e) => e.to_string(),
            }
        }
    };
    if !(settings.speed.is_finite() && settings.speed > 0.0) {
        return Err(Error::InvalidConfig(format!("speed must be > 0, got {}", settings.speed)));
    }
    let path = plan_fallback(settings.start, settings.goal, objects, settings.clearance)?;
    let duration = path_length(&path) / settings.speed;
    let mut plan = TrajectoryPlan::from_path(
        &path,
        duration,
        settings.fps,
        settings.instruction.clone(),
        settings.instruction.clone(),
        PlanSource::Fallback,
    )?;
    plan.fallback_reason = Some(reason);
    Ok(plan)
}

/// Rest-pose motion whose root follows the plan and whose body (facing +y at
/// rest) turns to face the horizontal direction of travel.
pub fn initial_motion(plan: &TrajectoryPlan, joints: usize) -> Result<MotionSequence> {
    let f = &plan.frames;
    let n = f.len();
    let mut yaw = 0.0;
    let mut yaws = vec![0.0; n];
    // first frame with a usable tangent sets the heading before it
    let mut first_set = None;
    for i in 0..n {
        let (a, b) = (f[i.saturating_sub(1)], f[(i + 1).min(n - 1)]);
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        if tx.hypot(ty) > 1e-9 {
            yaw = (-tx).atan2(ty);
            first_set.get_or_insert(i);
        }
        yaws[i] = yaw;
    }
    if let Some(k) = first_set {
        let heading = yaws[k];
        yaws[..k].fill(heading);
    }
    let frames = f
        .iter()
        .zip(&yaws)
        .map(|(r, y)| Frame {
            r: *r,
            gamma: yaw_rot6d(*y),
            ..Frame::rest(joints)
        })
        .collect();
    MotionSequence::new(plan.fps, frames)
}
