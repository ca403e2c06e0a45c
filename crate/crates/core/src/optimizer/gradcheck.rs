//! Central-difference verification of the analytic gradient.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::LossWeights;
use crate::diffusion::{msds_gradient_with, Denoiser, Projection};
use crate::error::{Error, Result};
use crate::optimizer::objective::{evaluate, FramePairs, Problem};

/// Relative step for central differences, scaled by `max(1, |x_i|)`.
const STEP: f64 = 1e-6;
/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    /// Coordinate attaining `max_rel_error`.
    pub worst: Option<usize>,
    pub coordinates: Vec<usize>,
    /// Error of the fixed-draw prior gradient against its closed form, when
    /// the prior is weighted.
    pub prior_error: Option<f64>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn scalar_value(problem: &Problem, x: &[f64], weights: &LossWeights, pairs: Option<&FramePairs>) -> Result<f64> {
    // the prior is excluded, so the generator is never drawn from
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    evaluate(problem, x, weights, pairs, &mut rng).map(|(c, _)| c.total)
}

/// Compare the analytic gradient of the deterministic terms against central
/// differences on `count` coordinates drawn with `seed` (all coordinates if
/// `count` exceeds the dimension). Collision pairs are detected once at `x`
/// and held fixed. A weighted prior must use a fixed draw; it is checked
/// against its closed form instead, since it is not the gradient of a scalar.
pub fn finite_diff_check(
    problem: &Problem,
    x: &[f64],
    weights: &LossWeights,
    count: usize,
    seed: u64,
) -> Result<GradCheck> {
    weights.validate()?;
    let prior_error = if weights.prior > 0.0 {
        Some(prior_closed_form_check(problem, x)?)
    } else {
        None
    };
    let det = LossWeights { prior: 0.0, ..*weights };

    let pairs = if det.collision > 0.0 && !problem.objects.is_empty() {
        Some(problem.detect_pairs(x)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, analytic) = evaluate(problem, x, &det, pairs.as_ref(), &mut rng)?;

    let mut coordinates: Vec<usize> = if count >= x.len() {
        (0..x.len()).collect()
    } else {
        sample(&mut rng, x.len(), count).into_vec()
    };
    coordinates.sort_unstable();

    let mut max_rel_error = 0.0;
    let mut worst = None;
    let mut probe = x.to_vec();
    for &i in &coordinates {
        let h = STEP * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let plus = scalar_value(problem, &probe, &det, pairs.as_ref())?;
        probe[i] = x[i] - h;
        let minus = scalar_value(problem, &probe, &det, pairs.as_ref())?;
        probe[i] = x[i];
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        if err > max_rel_error {
            max_rel_error = err;
            worst = Some(i);
        }
    }
    Ok(GradCheck {
        max_rel_error,
        worst,
        coordinates,
        prior_error,
    })
}

/// Dense matrix of an oracle projection, assembled from its definition
/// rather than by applying it.
fn dense_projection(p: &Projection) -> DMatrix<f64> {
    match p {
        Projection::Dense(m) => m.clone(),
        Projection::TemporalLowPass { channels, basis } => {
            let frames = basis.nrows();
            let time = basis * basis.transpose();
            let d = frames * channels;
            DMatrix::from_fn(d, d, |r, c| {
                if r % channels == c % channels {
                    time[(r / channels, c / channels)]
                } else {
                    0.0
                }
            })
        }
    }
}

/// For an oracle denoiser `P x + b` and a fixed draw `(t, eps)`, the prior
/// gradient is `w ((I - sqrt(abar) P) x - sqrt(1 - abar) P eps - b)`.
/// Returns the largest coordinate error against that form, relative to
/// `max(1, |closed form|)`.
pub fn prior_closed_form_check(problem: &Problem, x: &[f64]) -> Result<f64> {
    let prior = problem
        .prior
        .ok_or_else(|| Error::InvalidConfig("no prior to check".into()))?;
    let fixed = prior
        .config
        .fixed
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("prior check needs a fixed (t, noise) draw".into()))?;
    let Denoiser::Oracle(oracle) = &prior.denoiser else {
        return Err(Error::InvalidConfig("prior check needs an oracle denoiser".into()));
    };
    prior.config.validate(&prior.schedule)?;
    let eps = fixed.noise.clone().unwrap_or_else(|| vec![0.0; x.len()]);
    let got = msds_gradient_with(x, &prior.denoiser, &prior.schedule, &prior.config, fixed.t, &eps)?;

    let abar = prior.schedule.alpha_bar(fixed.t)?;
    let w = prior.config.weight(&prior.schedule, fixed.t)?;
    let p = dense_projection(oracle.projection());
    let d = x.len();
    if p.nrows() != d || eps.len() != d {
        return Err(Error::ShapeMismatch {
            expected: p.nrows(),
            got: d,
        });
    }
    let xv = DVector::from_column_slice(x);
    let ev = DVector::from_column_slice(&eps);
    let b = DVector::from_column_slice(oracle.offset());
    let lhs = DMatrix::<f64>::identity(d, d) - &p * abar.sqrt();
    let expected = (lhs * xv - (&p * ev) * (1.0 - abar).sqrt() - b) * w;

    Ok(got
        .gradient
        .iter()
        .zip(expected.iter())
        .map(|(g, e)| (g - e).abs() / e.abs().max(1.0))
        .fold(0.0, f64::max))
}
