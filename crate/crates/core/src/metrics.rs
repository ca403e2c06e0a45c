//! Motion quality metrics computed directly on a motion sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::kinematics::joint_positions;
use crate::motion::rotation::{matrix_to_axis_angle, rot6d_to_matrix};
use crate::motion::{BodyModel, MotionSequence};
use crate::numeric::compensated_sum;

/// Linear Gaussian pose encoder: `mu = A phi + b`, `log sigma = C phi + d`,
/// matrices stored row-major as `latent x pose_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEncoder {
    pub latent: usize,
    pub pose_dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl PoseEncoder {
    /// `A = I`, everything else zero, so the KL reduces to `|phi|^2 / 2`.
    pub fn identity(pose_dim: usize) -> Self {
        let mut a = vec![0.0; pose_dim * pose_dim];
        for i in 0..pose_dim {
            a[i * pose_dim + i] = 1.0;
        }
        PoseEncoder {
            latent: pose_dim,
            pose_dim,
            a,
            b: vec![0.0; pose_dim],
            c: vec![0.0; pose_dim * pose_dim],
            d: vec![0.0; pose_dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l, k) = (self.latent, self.pose_dim);
        for (name, len, want) in [
            ("A", self.a.len(), l * k),
            ("b", self.b.len(), l),
            ("C", self.c.len(), l * k),
            ("d", self.d.len(), l),
        ] {
            if len != want {
                return Err(Error::DimensionMismatch(format!(
                    "encoder {name} has {len} entries, expected {want}"
                )));
            }
        }
        if [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidConfig("encoder has non-finite entries".into()));
        }
        Ok(())
    }

    /// KL divergence of the encoded posterior from the standard normal.
    pub fn kl(&self, phi: &[f64]) -> f64 {
        let k = self.pose_dim;
        let terms = (0..self.latent).map(|i| {
            let row = i * k..(i + 1) * k;
            let dot = |m: &[f64]| m[row.clone()].iter().zip(phi).map(|(x, y)| x * y).sum::<f64>();
            let mu = dot(&self.a) + self.b[i];
            let log_sigma = dot(&self.c) + self.d[i];
            0.5 * (mu * mu + (2.0 * log_sigma).exp() - 1.0 - 2.0 * log_sigma)
        });
        compensated_sum(terms)
    }
}

/// Per-frame pose vectors: every non-root joint rotation as axis-angle,
/// concatenated.
pub fn axis_angle_poses(seq: &MotionSequence) -> Result<Vec<Vec<f64>>> {
    seq.frames
        .iter()
        .map(|f| {
            let mut phi = Vec::with_capacity(3 * f.theta.len());
            for block in &f.theta {
                let aa = matrix_to_axis_angle(&rot6d_to_matrix(block)?);
                phi.extend_from_slice(aa.as_slice());
            }
            Ok(phi)
        })
        .collect()
}

/// Mean over frames of the encoder KL.
pub fn pose_plausibility(seq: &MotionSequence, encoder: &PoseEncoder) -> Result<f64> {
    encoder.validate()?;
    let poses = axis_angle_poses(seq)?;
    if let Some(phi) = poses.first() {
        if phi.len() != encoder.pose_dim {
            return Err(Error::DimensionMismatch(format!(
                "pose has {} parameters, encoder expects {}",
                phi.len(),
                encoder.pose_dim
            )));
        }
    }
    if poses.is_empty() {
        return Err(Error::TooFewFrames { need: 1, got: 0 });
    }
    let kls: Vec<f64> = poses.par_iter().map(|phi| encoder.kl(phi)).collect();
    Ok(compensated_sum(kls) / poses.len() as f64)
}

/// Population standard deviation over frames of each pose parameter,
/// averaged over parameters.
pub fn pose_variation(seq: &MotionSequence) -> Result<f64> {
    if seq.len() < 2 {
        return Err(Error::TooFewFrames { need: 2, got: seq.len() });
    }
    let poses = axis_angle_poses(seq)?;
    let k = poses[0].len();
    if k == 0 {
        return Ok(0.0);
    }
    // Welford's running mean and sum of squared deviations
    let mut mean = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    for (count, phi) in poses.iter().enumerate() {
        let n = (count + 1) as f64;
        for j in 0..k {
            let delta = phi[j] - mean[j];
            mean[j] += delta / n;
            m2[j] += delta * (phi[j] - mean[j]);
        }
    }
    let n = poses.len() as f64;
    Ok(compensated_sum(m2.iter().map(|s| (s / n).sqrt())) / k as f64)
}

/// Length of the polyline traced by the root joint.
pub fn trajectory_length(seq: &MotionSequence, body: &BodyModel) -> Result<f64> {
    if seq.len() < 2 {
        return Err(Error::TooFewFrames { need: 2, got: seq.len() });
    }
    let root = body.root();
    let positions: Vec<_> = seq
        .frames
        .par_iter()
        .map(|f| joint_positions(body, f).map(|p| p[root]))
        .collect::<Result<_>>()?;
    Ok(compensated_sum(positions.windows(2).map(|w| (w[1] - w[0]).norm())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pose_plausibility: f64,
    pub pose_variation: f64,
    pub trajectory_length: f64,
}

pub fn evaluate_motion(seq: &MotionSequence, body: &BodyModel, encoder: &PoseEncoder) -> Result<MetricReport> {
    Ok(MetricReport {
        pose_plausibility: pose_plausibility(seq, encoder)?,
        pose_variation: pose_variation(seq)?,
        trajectory_length: trajectory_length(seq, body)?,
    })
}
