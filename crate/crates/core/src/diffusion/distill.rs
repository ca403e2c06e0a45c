//! Score-distillation gradient from a motion diffusion prior.
//!
//! For the current motion `X`, draw a step `t` and noise `eps`, noise the
//! motion to `X_t`, ask the denoiser for the clean motion it believes in and
//! return `w(t) (X - denoise(X_t, t, c))`. The denoiser Jacobian is never
//! formed; the returned vector is used directly as a gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::denoiser::Denoiser;
use crate::diffusion::schedule::{noise_with, standard_normal, NoiseSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Constant,
    OneMinusAlphaBar,
}

/// A pinned `(t, eps)` draw. `noise: None` means all-zero noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedDraw {
    pub t: usize,
    #[serde(default)]
    pub noise: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdsConfig {
    #[serde(default)]
    pub weighting: Weighting,
    pub t_min: usize,
    pub t_max: usize,
    /// When set, every call uses this draw instead of sampling.
    #[serde(default)]
    pub fixed: Option<FixedDraw>,
    /// Text condition handed to the denoiser.
    #[serde(default)]
    pub condition: String,
}

impl Default for MsdsConfig {
    fn default() -> Self {
        MsdsConfig {
            weighting: Weighting::Constant,
            t_min: 20,
            t_max: 980,
            fixed: None,
            condition: String::new(),
        }
    }
}

impl MsdsConfig {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        let steps = schedule.steps();
        if !(1 <= self.t_min && self.t_min <= self.t_max && self.t_max <= steps) {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= t_min <= t_max <= {steps}, got {}..={}",
                self.t_min, self.t_max
            )));
        }
        if let Some(fixed) = &self.fixed {
            if fixed.t == 0 || fixed.t > steps {
                return Err(Error::StepOutOfRange {
                    step: fixed.t,
                    max: steps,
                });
            }
        }
        Ok(())
    }

    pub fn weight(&self, schedule: &NoiseSchedule, t: usize) -> Result<f64> {
        Ok(match self.weighting {
            Weighting::Constant => 1.0,
            Weighting::OneMinusAlphaBar => 1.0 - schedule.alpha_bar(t)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdsSample {
    pub gradient: Vec<f64>,
    pub t: usize,
    pub weight: f64,
}

/// Single-sample estimate of the distillation gradient on the flattened
/// motion `x`.
pub fn msds_gradient<R: Rng + ?Sized>(
    x: &[f64],
    model: &Denoiser,
    schedule: &NoiseSchedule,
    cfg: &MsdsConfig,
    rng: &mut R,
) -> Result<MsdsSample> {
    cfg.validate(schedule)?;
    let (t, eps) = match &cfg.fixed {
        Some(fixed) => {
            let eps = fixed.noise.clone().unwrap_or_else(|| vec![0.0; x.len()]);
            (fixed.t, eps)
        }
        None => {
            let t = rng.random_range(cfg.t_min..=cfg.t_max);
            (t, standard_normal(x.len(), rng))
        }
    };
    msds_gradient_with(x, model, schedule, cfg, t, &eps)
}

/// Distillation gradient for an explicit `(t, eps)`.
pub fn msds_gradient_with(
    x: &[f64],
    model: &Denoiser,
    schedule: &NoiseSchedule,
    cfg: &MsdsConfig,
    t: usize,
    eps: &[f64],
) -> Result<MsdsSample> {
    let xt = noise_with(x, t, schedule, eps)?;
    let clean = model.denoise(&xt, t, schedule.steps(), &cfg.condition)?;
    let weight = cfg.weight(schedule, t)?;
    let gradient = x.iter().zip(&clean).map(|(a, b)| weight * (a - b)).collect();
    Ok(MsdsSample { gradient, t, weight })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::denoiser::OracleDenoiser;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed_zero(t: usize) -> MsdsConfig {
        MsdsConfig {
            t_min: 1,
            t_max: 1,
            fixed: Some(FixedDraw { t, noise: None }),
            ..MsdsConfig::default()
        }
    }

    #[test]
    fn identity_denoiser_without_noise_gives_zero() {
        let s = NoiseSchedule::noiseless(4).unwrap();
        let d = Denoiser::Oracle(OracleDenoiser::identity(3));
        let g = msds_gradient(&[1.0, 2.0, 3.0], &d, &s, &fixed_zero(2), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(g.gradient, vec![0.0; 3]);
    }

    #[test]
    fn identity_denoiser_with_noise() {
        let s = NoiseSchedule::from_betas(&[0.5, 0.5]).unwrap();
        let d = Denoiser::Oracle(OracleDenoiser::identity(2));
        let x = [1.0, -1.0];
        let eps = [0.2, 0.4];
        let g = msds_gradient_with(&x, &d, &s, &fixed_zero(2), 2, &eps).unwrap();
        // X - sqrt(0.25) X - sqrt(0.75) eps
        for i in 0..2 {
            assert_abs_diff_eq!(g.gradient[i], x[i] - 0.5 * x[i] - 0.75f64.sqrt() * eps[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_target_gives_displacement() {
        let s = NoiseSchedule::noiseless(3).unwrap();
        let target = vec![0.5, 0.5, -1.0];
        let d = Denoiser::Oracle(OracleDenoiser::constant(target.clone()));
        let x = [2.0, 0.0, 1.0];
        let g = msds_gradient(&x, &d, &s, &fixed_zero(1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(g.gradient, vec![1.5, -0.5, 2.0]);
    }

    #[test]
    fn projection_descent_contracts_geometrically() {
        // 3-D space, manifold = the line {(s, s, 1)}
        let basis = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let o = OracleDenoiser::affine_subspace(&basis, &[0.0, 0.0, 1.0]).unwrap();
        let d = Denoiser::Oracle(o.clone());
        let s = NoiseSchedule::noiseless(1).unwrap();
        let cfg = fixed_zero(1);
        let step = 0.3;
        let mut x = vec![2.0, -1.0, 4.0];
        let mut dist = o.manifold_distance(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let g = msds_gradient(&x, &d, &s, &cfg, &mut rng).unwrap();
            for (xi, gi) in x.iter_mut().zip(&g.gradient) {
                *xi -= step * gi;
            }
            let next = o.manifold_distance(&x);
            assert_abs_diff_eq!(next, dist * (1.0 - step), epsilon = 1e-12);
            dist = next;
        }
    }

    #[test]
    fn sampled_steps_stay_in_bounds() {
        let s = NoiseSchedule::linear(100, 1e-4, 2e-2).unwrap();
        let d = Denoiser::Oracle(OracleDenoiser::identity(2));
        let cfg = MsdsConfig {
            t_min: 10,
            t_max: 20,
            ..MsdsConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g = msds_gradient(&[0.1, 0.2], &d, &s, &cfg, &mut rng).unwrap();
            assert!((10..=20).contains(&g.t));
        }
    }

    #[test]
    fn invalid_bounds() {
        let s = NoiseSchedule::linear(10, 1e-4, 2e-2).unwrap();
        let d = Denoiser::Oracle(OracleDenoiser::identity(1));
        let cfg = MsdsConfig {
            t_min: 5,
            t_max: 11,
            ..MsdsConfig::default()
        };
        assert!(msds_gradient(&[0.0], &d, &s, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
