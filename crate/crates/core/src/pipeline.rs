//! End-to-end steps shared by the command-line tool and the tests:
//! plan, optimize, evaluate and render, all driven by one [`RunConfig`].

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::diffusion::{Denoiser, MlpDenoiser, MsdsConfig, OracleDenoiser, ScheduleConfig};
use crate::error::{Error, Result};
use crate::io::Scene;
use crate::metrics::{evaluate_motion, MetricReport, PoseEncoder};
use crate::motion::{Human, MotionSequence};
use crate::optimizer::{optimize, OptimConfig, OptimReport, Prior, Problem};
use crate::planner::{initial_motion, plan, Endpoint, PlanSettings, TrajectoryPlan};
use crate::render::{render_frame, Camera, GaussianCloud, Image};

/// Which clean-motion predictor backs the prior term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Projection of every channel onto its `modes` slowest cosine modes.
    TemporalLowPass { modes: usize },
    Neural { model: MlpDenoiser },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::TemporalLowPass { modes: 6 }
    }
}

impl PriorSpec {
    pub fn build(&self, frames: usize, frame_dim: usize) -> Result<Denoiser> {
        match self {
            PriorSpec::TemporalLowPass { modes } => Ok(Denoiser::Oracle(OracleDenoiser::temporal_low_pass(
                frames,
                frame_dim,
                (*modes).min(frames),
            )?)),
            PriorSpec::Neural { model } => {
                model.validate()?;
                if model.output_dim() != frames * frame_dim {
                    return Err(Error::ShapeMismatch {
                        expected: frames * frame_dim,
                        got: model.output_dim(),
                    });
                }
                Ok(Denoiser::Neural(model.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Minimum horizontal distance kept from every object box, in meters.
    pub clearance: f64,
    /// Walking speed used to time offline plans, in m/s.
    pub speed: f64,
    pub timeout_s: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            clearance: 0.3,
            speed: 1.0,
            timeout_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Camera position; defaults to a point in front of and above the scene.
    pub eye: Option<[f64; 3]>,
    /// Look-at point; defaults to the center of the human and objects.
    pub target: Option<[f64; 3]>,
    pub point_radius: f64,
    pub human_color: [f64; 3],
    pub object_color: [f64; 3],
    pub background: [f64; 3],
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 161,
            height: 121,
            focal: 140.0,
            eye: None,
            target: None,
            point_radius: 0.02,
            human_color: [0.85, 0.55, 0.4],
            object_color: [0.45, 0.45, 0.5],
            background: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub optimizer: OptimConfig,
    pub schedule: ScheduleConfig,
    pub msds: MsdsConfig,
    pub prior: PriorSpec,
    pub planner: PlannerConfig,
    pub render: RenderConfig,
}

/// Plan the scene's root trajectory. `offline` skips the external planner
/// even if one is configured in the environment.
pub fn plan_scene(scene: &Scene, cfg: &RunConfig, offline: bool) -> Result<TrajectoryPlan> {
    if !(cfg.planner.timeout_s.is_finite() && cfg.planner.timeout_s > 0.0) {
        return Err(Error::InvalidConfig("planner timeout must be > 0".into()));
    }
    let endpoint = if offline {
        None
    } else {
        Endpoint::from_env(Duration::from_secs_f64(cfg.planner.timeout_s))
    };
    let settings = PlanSettings {
        instruction: scene.instruction.clone(),
        start: scene.start,
        goal: scene.goal,
        clearance: cfg.planner.clearance,
        fps: scene.fps,
        speed: cfg.planner.speed,
        endpoint,
    };
    plan(&settings, &scene.objects)
}

/// Refine `init` (or the plan's rest-pose initialization) against the scene.
pub fn optimize_scene(
    scene: &Scene,
    plan: &TrajectoryPlan,
    human: &Human,
    cfg: &RunConfig,
    init: Option<&MotionSequence>,
) -> Result<OptimReport> {
    let x0 = match init {
        Some(m) => m.clone(),
        None => initial_motion(plan, human.body.pose_joints())?,
    };
    let mut problem = Problem::new(human, &scene.objects, &plan.frames, x0.fps);
    let prior;
    if cfg.optimizer.weights.prior > 0.0 {
        prior = Prior {
            denoiser: cfg.prior.build(x0.len(), x0.frame_dim())?,
            schedule: cfg.schedule.build()?,
            config: cfg.msds.clone(),
        };
        problem = problem.with_prior(&prior);
    }
    optimize(&problem, &x0, &cfg.optimizer)
}

pub fn evaluate(motion: &MotionSequence, human: &Human, encoder: Option<&PoseEncoder>) -> Result<MetricReport> {
    let identity;
    let encoder = match encoder {
        Some(e) => e,
        None => {
            identity = PoseEncoder::identity(3 * human.body.pose_joints());
            &identity
        }
    };
    evaluate_motion(motion, &human.body, encoder)
}

/// Splats for the posed human at `frame` and for every object.
pub fn scene_cloud(motion: &MotionSequence, frame: usize, human: &Human, scene: &Scene, cfg: &RenderConfig) -> Result<GaussianCloud> {
    let f = motion.frames.get(frame).ok_or(Error::LengthMismatch {
        expected: motion.len(),
        got: frame,
    })?;
    let posed = human.pose(f)?;
    let mut cloud = GaussianCloud::from_points(&posed.points, cfg.point_radius, 1.0, cfg.human_color);
    for o in &scene.objects {
        cloud.extend(GaussianCloud::from_points(o.points(), cfg.point_radius, 1.0, cfg.object_color));
    }
    Ok(cloud)
}

pub fn render_motion_frame(
    motion: &MotionSequence,
    frame: usize,
    human: &Human,
    scene: &Scene,
    cfg: &RenderConfig,
) -> Result<Image> {
    let cloud = scene_cloud(motion, frame, human, scene, cfg)?;
    let centers: Vec<_> = cloud.gaussians.iter().map(|g| g.center).collect();
    let target = cfg.target.unwrap_or_else(|| {
        let n = centers.len().max(1) as f64;
        std::array::from_fn(|k| centers.iter().map(|c| c[k]).sum::<f64>() / n)
    });
    let eye = cfg
        .eye
        .unwrap_or([target[0] + 2.5, target[1] - 3.5, target[2] + 1.8]);
    let mut camera = Camera::look_at(eye, target, [0.0, 0.0, 1.0], cfg.focal, cfg.width, cfg.height)?;
    camera.background = cfg.background;
    render_frame(&cloud, &camera)
}
