//! Clean-motion predictors used by the distillation gradient.
//!
//! Two kinds are available. The oracle is an analytic affine projection
//! `x -> P x + b`, independent of the diffusion step, so that convergence of
//! the distillation loop can be checked in closed form. The neural kind is a
//! small multilayer perceptron loaded from JSON.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IDEMPOTENCE_TOLERANCE: f64 = 1e-8;

/// Linear part of the oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Dense(DMatrix<f64>),
    /// Projects every channel's time series onto the first `basis.ncols()`
    /// orthonormal cosine modes. Equivalent to a dense `D x D` matrix with
    /// `D = frames * channels` but stored as `frames x k`.
    TemporalLowPass { channels: usize, basis: DMatrix<f64> },
}

impl Projection {
    pub fn dim(&self) -> usize {
        match self {
            Projection::Dense(p) => p.nrows(),
            Projection::TemporalLowPass { channels, basis } => channels * basis.nrows(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Projection::Dense(p) => (p * DVector::from_column_slice(x)).as_slice().to_vec(),
            Projection::TemporalLowPass { channels, basis } => {
                let frames = basis.nrows();
                let mut out = vec![0.0; x.len()];
                for ch in 0..*channels {
                    let series = DVector::from_iterator(frames, (0..frames).map(|f| x[f * channels + ch]));
                    let coeffs = basis.tr_mul(&series);
                    let smooth = basis * coeffs;
                    for f in 0..frames {
                        out[f * channels + ch] = smooth[f];
                    }
                }
                out
            }
        }
    }

    fn idempotence_error(&self) -> f64 {
        match self {
            Projection::Dense(p) => (p * p - p).amax(),
            Projection::TemporalLowPass { basis, .. } => {
                let k = basis.ncols();
                (basis.tr_mul(basis) - DMatrix::identity(k, k)).amax()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDenoiser {
    projection: Projection,
    offset: Vec<f64>,
}

impl OracleDenoiser {
    pub fn new(projection: Projection, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != projection.dim() {
            return Err(Error::ShapeMismatch {
                expected: projection.dim(),
                got: offset.len(),
            });
        }
        if let Projection::Dense(p) = &projection {
            if !p.is_square() {
                return Err(Error::DimensionMismatch(format!(
                    "projection is {}x{}, must be square",
                    p.nrows(),
                    p.ncols()
                )));
            }
        }
        let err = projection.idempotence_error();
        if !(err <= IDEMPOTENCE_TOLERANCE) {
            return Err(Error::InvalidConfig(format!(
                "oracle projection is not idempotent (max |PP - P| = {err:e})"
            )));
        }
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("oracle offset has non-finite entries".into()));
        }
        Ok(OracleDenoiser { projection, offset })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Projection::Dense(DMatrix::identity(dim, dim)), vec![0.0; dim]).expect("identity is a projection")
    }

    /// Always predicts `target`.
    pub fn constant(target: Vec<f64>) -> Self {
        let d = target.len();
        Self::new(Projection::Dense(DMatrix::zeros(d, d)), target).expect("zero map is a projection")
    }

    /// Orthogonal projection onto `{point + span(basis)}`. The basis columns
    /// need not be orthonormal but must be independent.
    pub fn affine_subspace(basis: &DMatrix<f64>, point: &[f64]) -> Result<Self> {
        if basis.nrows() != point.len() {
            return Err(Error::ShapeMismatch {
                expected: basis.nrows(),
                got: point.len(),
            });
        }
        let q = basis.clone().qr().q();
        let p = &q * q.transpose();
        let pt = DVector::from_column_slice(point);
        let offset = &pt - &p * &pt;
        Self::new(Projection::Dense(p), offset.as_slice().to_vec())
    }

    /// Keeps the lowest `modes` cosine frequencies of every channel.
    pub fn temporal_low_pass(frames: usize, channels: usize, modes: usize) -> Result<Self> {
        if frames == 0 || channels == 0 || modes == 0 || modes > frames {
            return Err(Error::InvalidConfig(format!(
                "low-pass oracle needs 1 <= modes <= frames, got {modes} modes for {frames} frames"
            )));
        }
        let n = frames as f64;
        let basis = DMatrix::from_fn(frames, modes, |f, k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale * (std::f64::consts::PI * (f as f64 + 0.5) * k as f64 / n).cos()
        });
        Self::new(
            Projection::TemporalLowPass { channels, basis },
            vec![0.0; frames * channels],
        )
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.projection.apply(x);
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        out
    }

    /// `|x - (P x + b)|`, the distance to the oracle's manifold when `P` is an
    /// orthogonal projector and `P b = 0`.
    pub fn manifold_distance(&self, x: &[f64]) -> f64 {
        let proj = self.predict(x);
        crate::numeric::compensated_sum(x.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b))).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Multilayer perceptron over `[x_t, t / T, embedding(condition)]`. Hidden
/// layers use `activation`; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDenoiser {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

impl MlpDenoiser {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("denoiser has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::InvalidConfig(format!(
                    "layer {i}: {} weights / {} biases for a {}x{} layer",
                    l.weights.len(),
                    l.bias.len(),
                    l.rows,
                    l.cols
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("layer {i} has non-finite parameters")));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::InvalidConfig(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].cols,
                    pair[0].rows
                )));
            }
        }
        let widths: Vec<usize> = self.embeddings.values().map(Vec::len).collect();
        if widths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidConfig("embeddings have different widths".into()));
        }
        let d = self.output_dim();
        if self.layers[0].cols != d + 1 + self.embedding_width() {
            return Err(Error::InvalidConfig(format!(
                "first layer takes {} inputs, expected motion {d} + 1 + embedding {}",
                self.layers[0].cols,
                self.embedding_width()
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    pub fn embedding_width(&self) -> usize {
        self.embeddings.values().next().map_or(0, Vec::len)
    }

    /// Unknown conditions embed to zeros.
    pub fn predict(&self, xt: &[f64], t: usize, steps: usize, condition: &str) -> Result<Vec<f64>> {
        let d = self.output_dim();
        if xt.len() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: xt.len(),
            });
        }
        let mut act: Vec<f64> = xt.to_vec();
        act.push(t as f64 / steps.max(1) as f64);
        match self.embeddings.get(condition) {
            Some(e) => act.extend_from_slice(e),
            None => act.extend(std::iter::repeat_n(0.0, self.embedding_width())),
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.clone();
            for (r, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                *out += row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
                if i != last {
                    *out = self.activation.apply(*out);
                }
            }
            act = next;
        }
        Ok(act)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Denoiser {
    Oracle(OracleDenoiser),
    Neural(MlpDenoiser),
}

impl Denoiser {
    /// Predicted clean motion for noisy input `xt` at step `t` of `steps`.
    pub fn denoise(&self, xt: &[f64], t: usize, steps: usize, condition: &str) -> Result<Vec<f64>> {
        if xt.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMotion("denoiser input has non-finite entries".into()));
        }
        if t == 0 || t > steps {
            return Err(Error::StepOutOfRange { step: t, max: steps });
        }
        match self {
            Denoiser::Oracle(o) => {
                if xt.len() != o.dim() {
                    return Err(Error::ShapeMismatch {
                        expected: o.dim(),
                        got: xt.len(),
                    });
                }
                Ok(o.predict(xt))
            }
            Denoiser::Neural(m) => m.predict(xt, t, steps, condition),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Denoiser::Oracle(o) => o.dim(),
            Denoiser::Neural(m) => m.output_dim(),
        }
    }
}
