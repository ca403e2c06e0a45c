//! First-order refinement of a motion under the weighted objective.

pub mod gradcheck;
pub mod objective;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::LossWeights;
use crate::error::{Error, Result};
use crate::motion::sequence::{frame_dim, GAMMA_OFFSET, THETA_OFFSET};
use crate::motion::MotionSequence;
use crate::numeric::{all_finite, l2_norm};

pub use gradcheck::{finite_diff_check, prior_closed_form_check, GradCheck};
pub use objective::{evaluate, total_gradient, Components, FramePairs, Prior, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    GradientDescent,
}

impl Default for Method {
    fn default() -> Self {
        Method::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Which parts of each frame are free. Frozen parts keep their initial value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMask {
    pub translation: bool,
    pub orientation: bool,
    pub pose: bool,
}

impl Default for VariableMask {
    fn default() -> Self {
        VariableMask {
            translation: true,
            orientation: true,
            pose: true,
        }
    }
}

impl VariableMask {
    fn frees(&self, offset_in_frame: usize) -> bool {
        if offset_in_frame < GAMMA_OFFSET {
            self.translation
        } else if offset_in_frame < THETA_OFFSET {
            self.orientation
        } else {
            self.pose
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub weights: LossWeights,
    pub max_iters: usize,
    pub step_size: f64,
    #[serde(default)]
    pub method: Method,
    /// Stop once the masked gradient norm is at most this.
    #[serde(default)]
    pub grad_tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub mask: VariableMask,
    /// Record wall-clock time per iteration. Off by default so that
    /// reports are reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            weights: LossWeights::default(),
            max_iters: 500,
            step_size: 0.01,
            method: Method::default(),
            grad_tol: 1e-8,
            seed: 0,
            mask: VariableMask::default(),
            record_timing: false,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        if let Method::Adam { beta1, beta2, epsilon } = self.method {
            for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
                if !(0.0..1.0).contains(&b) {
                    return Err(Error::InvalidConfig(format!("{name} must be in [0, 1), got {b}")));
                }
            }
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
            }
        }
        Ok(())
    }
}

/// State before the update of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub components: Components,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimReport {
    pub config: OptimConfig,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub motion: MotionSequence,
}

fn mask_gradient(grad: &mut [f64], dim: usize, mask: &VariableMask) {
    for (i, g) in grad.iter_mut().enumerate() {
        if !mask.frees(i % dim) {
            *g = 0.0;
        }
    }
}

/// Refine `x0` under `cfg`. Deterministic given `cfg.seed`.
pub fn optimize(problem: &Problem, x0: &MotionSequence, cfg: &OptimConfig) -> Result<OptimReport> {
    cfg.validate()?;
    x0.validate()?;
    if x0.len() < 4 {
        return Err(Error::TooFewFrames { need: 4, got: x0.len() });
    }
    if problem.plan.len() != x0.len() {
        return Err(Error::LengthMismatch {
            expected: x0.len(),
            got: problem.plan.len(),
        });
    }
    if x0.joints() != problem.joints() {
        return Err(Error::DimensionMismatch(format!(
            "motion has {} joint rotations, body needs {}",
            x0.joints(),
            problem.joints()
        )));
    }

    let dim = frame_dim(problem.joints());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.to_flat();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    let start = Instant::now();

    for iteration in 0..cfg.max_iters {
        let (components, mut grad) = total_gradient(problem, &x, &cfg.weights, &mut rng)?;
        mask_gradient(&mut grad, dim, &cfg.mask);
        let grad_norm = l2_norm(&grad);
        if !components.is_finite() || !grad_norm.is_finite() {
            return Err(Error::NonFiniteState {
                iteration,
                detail: format!("objective {components:?}, gradient norm {grad_norm}"),
            });
        }
        records.push(IterationRecord {
            iteration,
            components,
            grad_norm,
            wall_seconds: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
        });
        if grad_norm <= cfg.grad_tol {
            converged = true;
            break;
        }

        match cfg.method {
            Method::GradientDescent => {
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi -= cfg.step_size * gi;
                }
            }
            Method::Adam { beta1, beta2, epsilon } => {
                let k = (iteration + 1) as i32;
                let c1 = 1.0 - beta1.powi(k);
                let c2 = 1.0 - beta2.powi(k);
                for i in 0..x.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    x[i] -= cfg.step_size * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                }
            }
        }
        if !all_finite(&x) {
            return Err(Error::NonFiniteState {
                iteration,
                detail: "update produced a non-finite motion".into(),
            });
        }
    }

    let motion = problem.unflatten(&x)?;
    motion.validate()?;
    Ok(OptimReport {
        config: cfg.clone(),
        records,
        converged,
        motion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::Human;

    fn line(n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect()
    }

    #[test]
    fn trajectory_only_reaches_plan() {
        let human = Human::desk_default();
        let plan = line(8);
        let problem = Problem::new(&human, &[], &plan, 30.0);
        let x0 = MotionSequence::from_translations(30.0, 7, &[[0.3, -0.2, 0.1]; 8]).unwrap();
        let cfg = OptimConfig {
            weights: LossWeights {
                trajectory: 1.0,
                middle: 1.0,
                end: 1.0,
                ..LossWeights::zero()
            },
            max_iters: 200,
            step_size: 0.25,
            method: Method::GradientDescent,
            grad_tol: 0.0,
            ..OptimConfig::default()
        };
        let report = optimize(&problem, &x0, &cfg).unwrap();
        for (r, p) in report.motion.translations().iter().zip(&plan) {
            for a in 0..3 {
                assert!((r[a] - p[a]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mask_freezes_translation() {
        let human = Human::desk_default();
        let plan = line(6);
        let problem = Problem::new(&human, &[], &plan, 30.0);
        let x0 = MotionSequence::from_translations(30.0, 7, &[[0.0; 3]; 6]).unwrap();
        let cfg = OptimConfig {
            weights: LossWeights {
                trajectory: 1.0,
                middle: 1.0,
                end: 1.0,
                ..LossWeights::zero()
            },
            max_iters: 5,
            mask: VariableMask {
                translation: false,
                ..VariableMask::default()
            },
            ..OptimConfig::default()
        };
        let report = optimize(&problem, &x0, &cfg).unwrap();
        assert_eq!(report.motion, x0);
        assert!(report.converged);
    }

    #[test]
    fn records_are_bounded_and_untimed_by_default() {
        let human = Human::desk_default();
        let plan = line(5);
        let problem = Problem::new(&human, &[], &plan, 30.0);
        let x0 = MotionSequence::from_translations(30.0, 7, &[[1.0; 3]; 5]).unwrap();
        let cfg = OptimConfig {
            weights: LossWeights {
                prior: 0.0,
                collision: 0.0,
                ..LossWeights::default()
            },
            max_iters: 7,
            ..OptimConfig::default()
        };
        let report = optimize(&problem, &x0, &cfg).unwrap();
        assert!(report.records.len() <= 7);
        assert!(report.records.iter().all(|r| r.wall_seconds.is_none()));
    }

    #[test]
    fn rejects_short_motion_and_bad_config() {
        let human = Human::desk_default();
        let plan = line(3);
        let problem = Problem::new(&human, &[], &plan, 30.0);
        let x0 = MotionSequence::from_translations(30.0, 7, &plan).unwrap();
        assert!(matches!(
            optimize(&problem, &x0, &OptimConfig::default()),
            Err(Error::TooFewFrames { .. })
        ));
        let bad = OptimConfig {
            method: Method::Adam {
                beta1: 1.0,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            ..OptimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn diverging_step_is_reported() {
        let human = Human::desk_default();
        let plan = line(6);
        let problem = Problem::new(&human, &[], &plan, 30.0);
        let x0 = MotionSequence::from_translations(30.0, 7, &[[5.0; 3]; 6]).unwrap();
        let cfg = OptimConfig {
            weights: LossWeights {
                trajectory: 1.0,
                middle: 1.0,
                end: 1.0,
                ..LossWeights::zero()
            },
            max_iters: 2000,
            step_size: 10.0,
            method: Method::GradientDescent,
            ..OptimConfig::default()
        };
        assert!(matches!(
            optimize(&problem, &x0, &cfg),
            Err(Error::NonFiniteState { .. })
        ));
    }
}
