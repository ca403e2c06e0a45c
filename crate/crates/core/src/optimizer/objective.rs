//! The combined objective and its gradient on the flattened motion.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    collision_loss, detect_collisions, smoothness_loss, trajectory_loss, CollisionPairs, LossWeights, SceneObject,
};
use crate::diffusion::{msds_gradient, Denoiser, MsdsConfig, NoiseSchedule};
use crate::error::{Error, Result};
use crate::motion::{frame_dim, Frame, Human, MotionSequence};
use crate::numeric::{compensated_sum, l2_norm, Vec3};

/// The diffusion prior: denoiser, schedule and sampling settings.
#[derive(Debug, Clone)]
pub struct Prior {
    pub denoiser: Denoiser,
    pub schedule: NoiseSchedule,
    pub config: MsdsConfig,
}

/// Raw (unweighted) value of every term at one motion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    /// Norm of the distillation gradient; the term has no scalar value.
    pub prior: f64,
    pub trajectory: f64,
    pub smoothness: f64,
    pub collision: f64,
    /// Weighted sum of the scalar terms.
    pub total: f64,
}

impl Components {
    pub fn is_finite(&self) -> bool {
        [self.prior, self.trajectory, self.smoothness, self.collision, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Collision pairs per frame, per object.
pub type FramePairs = Vec<Vec<CollisionPairs>>;

/// Everything the objective reads besides the motion and the weights.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub human: &'a Human,
    pub objects: &'a [SceneObject],
    /// Planned root translation per frame.
    pub plan: &'a [[f64; 3]],
    pub prior: Option<&'a Prior>,
    pub fps: f64,
    /// Leave clamped collision pairs out of the reported value.
    pub drop_clamped: bool,
}

impl<'a> Problem<'a> {
    pub fn new(human: &'a Human, objects: &'a [SceneObject], plan: &'a [[f64; 3]], fps: f64) -> Self {
        Problem {
            human,
            objects,
            plan,
            prior: None,
            fps,
            drop_clamped: false,
        }
    }

    pub fn with_prior(mut self, prior: &'a Prior) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn joints(&self) -> usize {
        self.human.body.pose_joints()
    }

    pub fn unflatten(&self, x: &[f64]) -> Result<MotionSequence> {
        MotionSequence::from_flat(self.fps, self.joints(), x)
    }

    /// Current collision pairs for every frame and object.
    pub fn detect_pairs(&self, x: &[f64]) -> Result<FramePairs> {
        let seq = self.unflatten(x)?;
        seq.frames
            .par_iter()
            .map(|frame| {
                let posed = self.human.pose(frame)?;
                self.objects
                    .iter()
                    .map(|o| detect_collisions(&posed.points, &posed.normals, o))
                    .collect()
            })
            .collect()
    }

    fn frame_collision(&self, frame: &Frame, margin: f64, fixed: Option<&[CollisionPairs]>) -> Result<(f64, Vec<f64>)> {
        let posed = self.human.pose(frame)?;
        let m = posed.points.len();
        let mut loss = Vec::with_capacity(self.objects.len());
        let mut grad_points = vec![Vec3::zeros(); m];
        let mut grad_normals = vec![Vec3::zeros(); m];
        let mut any_active = false;
        for (k, object) in self.objects.iter().enumerate() {
            let pairs = match fixed {
                Some(p) => {
                    // frozen pairs keep their indices; normals follow the pose
                    let mut refreshed = p[k].clone();
                    for pair in &mut refreshed.pairs {
                        if pair.human_index >= m {
                            return Err(Error::StaleIndices {
                                index: pair.human_index,
                                len: m,
                            });
                        }
                        pair.human_normal = posed.normals[pair.human_index];
                    }
                    refreshed
                }
                None => detect_collisions(&posed.points, &posed.normals, object)?,
            };
            let term = collision_loss(&pairs, &posed.points, object, margin, self.drop_clamped)?;
            loss.push(term.loss);
            if term.active > 0 {
                any_active = true;
                for i in 0..m {
                    grad_points[i] += term.grad_points[i];
                    grad_normals[i] += term.grad_normals[i];
                }
            }
        }
        let grad = if any_active {
            self.human.backward(&posed, &grad_points, &grad_normals)?
        } else {
            vec![0.0; frame_dim(self.joints())]
        };
        Ok((compensated_sum(loss), grad))
    }
}

/// Components and gradient at the flattened motion `x`.
pub fn total_gradient<R: Rng + ?Sized>(
    problem: &Problem,
    x: &[f64],
    weights: &LossWeights,
    rng: &mut R,
) -> Result<(Components, Vec<f64>)> {
    evaluate(problem, x, weights, None, rng)
}

/// Like [`total_gradient`], optionally with collision pairs held fixed
/// instead of re-detected.
pub fn evaluate<R: Rng + ?Sized>(
    problem: &Problem,
    x: &[f64],
    weights: &LossWeights,
    fixed_pairs: Option<&FramePairs>,
    rng: &mut R,
) -> Result<(Components, Vec<f64>)> {
    weights.validate()?;
    let seq = problem.unflatten(x)?;
    let n = seq.len();
    let dim = frame_dim(problem.joints());
    let mut grad = vec![0.0; x.len()];
    let mut c = Components::default();
    let w = weights;

    if w.prior > 0.0 {
        let prior = problem
            .prior
            .ok_or_else(|| Error::InvalidConfig("prior weight is positive but no prior is configured".into()))?;
        let sample = msds_gradient(x, &prior.denoiser, &prior.schedule, &prior.config, rng)?;
        c.prior = l2_norm(&sample.gradient);
        for (g, s) in grad.iter_mut().zip(&sample.gradient) {
            *g += w.prior * s;
        }
    }

    let translations = seq.translations();
    // unweighted terms are still reported when they can be evaluated
    if w.trajectory > 0.0 || problem.plan.len() == n {
        let t = trajectory_loss(&translations, problem.plan, w.middle, w.end)?;
        c.trajectory = t.loss;
        add_translation_grad(&mut grad, dim, &t.grad, w.trajectory);
    }

    if w.smoothness > 0.0 || n >= 4 {
        let s = smoothness_loss(&translations)?;
        c.smoothness = s.loss;
        add_translation_grad(&mut grad, dim, &s.grad, w.smoothness);
    }

    if w.collision > 0.0 && !problem.objects.is_empty() {
        if let Some(p) = fixed_pairs {
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
        }
        let per_frame: Vec<(f64, Vec<f64>)> = seq
            .frames
            .par_iter()
            .enumerate()
            .map(|(i, frame)| problem.frame_collision(frame, w.margin, fixed_pairs.map(|p| &p[i][..])))
            .collect::<Result<_>>()?;
        c.collision = compensated_sum(per_frame.iter().map(|(l, _)| *l));
        for (i, (_, g)) in per_frame.iter().enumerate() {
            for (dst, src) in grad[i * dim..(i + 1) * dim].iter_mut().zip(g) {
                *dst += w.collision * src;
            }
        }
    }

    c.total = w.trajectory * c.trajectory + w.smoothness * c.smoothness + w.collision * c.collision;
    Ok((c, grad))
}

fn add_translation_grad(grad: &mut [f64], dim: usize, g: &[Vec3], weight: f64) {
    if weight == 0.0 {
        return;
    }
    for (i, gi) in g.iter().enumerate() {
        for a in 0..3 {
            grad[i * dim + a] += weight * gi[a];
        }
    }
}
