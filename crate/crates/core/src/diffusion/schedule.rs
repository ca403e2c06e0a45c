use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step retention `alpha_t = 1 - beta_t` and its running product
/// `alpha_bar_t`. Steps are 1-based: `t` ranges over `1..=steps()`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

/// Serializable description of a linear-beta schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 2e-2,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

impl NoiseSchedule {
    /// Linearly spaced betas from `beta_start` to `beta_end`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("need at least one step".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(&betas)
    }

    /// Arbitrary betas in `[0, 1)`. A zero beta is a noiseless step, useful
    /// for tests.
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidSchedule("need at least one step".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && **b < 1.0)) {
            return Err(Error::InvalidSchedule(format!("beta {b} outside [0, 1)")));
        }
        let alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bar = alpha
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule { alpha, alpha_bar })
    }

    /// `steps` noiseless steps (`alpha_bar_t = 1` everywhere).
    pub fn noiseless(steps: usize) -> Result<Self> {
        Self::from_betas(&vec![0.0; steps])
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::StepOutOfRange {
                step: t,
                max: self.steps(),
            });
        }
        Ok(t - 1)
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(self.alpha[self.index(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        Ok(self.alpha_bar[self.index(t)?])
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }
}

/// `X_t = sqrt(alpha_bar_t) X_0 + sqrt(1 - alpha_bar_t) eps` for a given noise
/// vector.
pub fn noise_with(x0: &[f64], t: usize, schedule: &NoiseSchedule, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != x0.len() {
        return Err(Error::ShapeMismatch {
            expected: x0.len(),
            got: eps.len(),
        });
    }
    let ab = schedule.alpha_bar(t)?;
    let signal = ab.sqrt();
    let noise = (1.0 - ab).sqrt();
    Ok(x0.iter().zip(eps).map(|(x, e)| signal * x + noise * e).collect())
}

pub fn standard_normal<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draw `X_t ~ q(X_t | X_0)` in closed form.
pub fn sample_forward<R: Rng + ?Sized>(
    x0: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Vec<f64>> {
    schedule.index(t)?;
    let eps = standard_normal(x0.len(), rng);
    noise_with(x0, t, schedule, &eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_schedule() {
        let s = NoiseSchedule::noiseless(3).unwrap();
        assert_eq!(s.alpha_bars(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn cumulative_product_by_hand() {
        let s = NoiseSchedule::from_betas(&[0.5, 0.5]).unwrap();
        assert_eq!(s.alpha_bars(), &[0.5, 0.25]);
    }

    #[test]
    fn linear_schedule_is_strictly_decreasing() {
        let s = NoiseSchedule::linear(100, 1e-4, 2e-2).unwrap();
        // brute force: rebuild every product from scratch
        for t in 1..=100 {
            let direct: f64 = (1..=t).map(|s_| s.alpha(s_).unwrap()).product();
            assert!((direct - s.alpha_bar(t).unwrap()).abs() < 1e-12);
        }
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn invalid_schedules() {
        assert!(NoiseSchedule::linear(0, 1e-4, 2e-2).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 2e-2).is_err());
        assert!(NoiseSchedule::linear(10, 0.3, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.1, 1.0).is_err());
        assert!(NoiseSchedule::from_betas(&[1.0]).is_err());
    }

    #[test]
    fn step_bounds() {
        let s = NoiseSchedule::linear(10, 1e-4, 2e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_forward(&[0.0], 0, &s, &mut rng),
            Err(Error::StepOutOfRange { step: 0, max: 10 })
        ));
        assert!(sample_forward(&[0.0], 11, &s, &mut rng).is_err());
        assert!(sample_forward(&[0.0], 10, &s, &mut rng).is_ok());
    }

    #[test]
    fn zero_noise_returns_input() {
        let s = NoiseSchedule::noiseless(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = vec![0.5, -1.0, 2.0];
        assert_eq!(sample_forward(&x0, 2, &s, &mut rng).unwrap(), x0);
    }

    #[test]
    fn seeded_draws_repeat() {
        let s = NoiseSchedule::linear(50, 1e-4, 2e-2).unwrap();
        let x0 = vec![1.0; 16];
        let a = sample_forward(&x0, 30, &s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_forward(&x0, 30, &s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn late_steps_are_almost_pure_noise() {
        // the mean is near zero here, so it is judged against the standard error
        let s = NoiseSchedule::linear(1000, 1e-4, 2e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x0 = [3.0, -4.0, 5.0, -6.0];
        let draws = 100_000;
        for t in [900, 1000] {
            let abar = s.alpha_bar(t).unwrap();
            let mut sum = [0.0; 4];
            let mut sq = [0.0; 4];
            for _ in 0..draws {
                let x = sample_forward(&x0, t, &s, &mut rng).unwrap();
                for k in 0..4 {
                    sum[k] += x[k];
                    sq[k] += x[k] * x[k];
                }
            }
            let n = draws as f64;
            for k in 0..4 {
                let mean = sum[k] / n;
                let var = sq[k] / n - mean * mean;
                let se = ((1.0 - abar) / n).sqrt();
                assert!((mean - abar.sqrt() * x0[k]).abs() < 5.0 * se, "t {t}: mean {mean}");
                assert!((var / (1.0 - abar) - 1.0).abs() < 0.02, "t {t}: variance {var}");
            }
        }
    }
}
