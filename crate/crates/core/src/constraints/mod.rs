//! Trajectory alignment, jerk smoothness and collision penalties, each with
//! an analytic gradient.

pub mod collision;
pub mod grid;
pub mod scene;
pub mod smoothness;
pub mod trajectory;

use serde::{Deserialize, Serialize};

pub use collision::{collision_loss, detect_collisions, CollisionPair, CollisionPairs, CollisionTerm};
pub use grid::PointGrid;
pub use scene::{Aabb, SceneObject};
pub use smoothness::{jerk, smoothness_loss};
pub use trajectory::{trajectory_loss, TranslationTerm};

use crate::error::{Error, Result};

/// Weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Diffusion-prior (score distillation) term.
    pub prior: f64,
    pub trajectory: f64,
    pub smoothness: f64,
    pub collision: f64,
    /// Trajectory weight on interior frames.
    pub middle: f64,
    /// Trajectory weight on the first and last frame.
    pub end: f64,
    /// Collision margin in meters.
    pub margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            prior: 1.0,
            trajectory: 1.0,
            smoothness: 0.01,
            collision: 10.0,
            middle: 0.1,
            end: 1.0,
            margin: 0.01,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        LossWeights {
            prior: 0.0,
            trajectory: 0.0,
            smoothness: 0.0,
            collision: 0.0,
            middle: 0.0,
            end: 0.0,
            margin: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("prior", self.prior),
            ("trajectory", self.trajectory),
            ("smoothness", self.smoothness),
            ("collision", self.collision),
            ("middle", self.middle),
            ("end", self.end),
            ("margin", self.margin),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("weight {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}
