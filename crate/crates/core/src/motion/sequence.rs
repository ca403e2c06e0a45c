use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::rotation::{rot6d_to_matrix, IDENTITY_6D};

/// One frame of motion: root translation, global orientation and per-joint
/// local rotations, all rotations in 6D form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub r: [f64; 3],
    pub gamma: [f64; 6],
    pub theta: Vec<[f64; 6]>,
}

impl Frame {
    pub fn rest(joints: usize) -> Self {
        Frame {
            r: [0.0; 3],
            gamma: IDENTITY_6D,
            theta: vec![IDENTITY_6D; joints],
        }
    }

    pub fn dim(&self) -> usize {
        frame_dim(self.theta.len())
    }
}

/// Flattened size of a frame with `joints` non-root joints.
pub const fn frame_dim(joints: usize) -> usize {
    3 + 6 + joints * 6
}

/// Offset of the 6D orientation block inside a flattened frame.
pub const GAMMA_OFFSET: usize = 3;
/// Offset of the first joint rotation inside a flattened frame.
pub const THETA_OFFSET: usize = 9;

/// The optimization variable: `N >= 2` frames sampled at `fps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    pub fps: f64,
    pub frames: Vec<Frame>,
}

impl MotionSequence {
    pub fn new(fps: f64, frames: Vec<Frame>) -> Result<Self> {
        let seq = MotionSequence { fps, frames };
        seq.validate()?;
        Ok(seq)
    }

    /// A sequence in rest pose whose root follows `translations`.
    pub fn from_translations(fps: f64, joints: usize, translations: &[[f64; 3]]) -> Result<Self> {
        let frames = translations
            .iter()
            .map(|r| Frame {
                r: *r,
                ..Frame::rest(joints)
            })
            .collect();
        Self::new(fps, frames)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of non-root joints per frame.
    pub fn joints(&self) -> usize {
        self.frames.first().map_or(0, |f| f.theta.len())
    }

    pub fn frame_dim(&self) -> usize {
        frame_dim(self.joints())
    }

    pub fn dim(&self) -> usize {
        self.len() * self.frame_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidMotion(format!("fps must be positive, got {}", self.fps)));
        }
        if self.frames.len() < 2 {
            return Err(Error::InvalidMotion(format!(
                "a motion needs at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        let joints = self.joints();
        for (i, f) in self.frames.iter().enumerate() {
            if f.theta.len() != joints {
                return Err(Error::InvalidMotion(format!(
                    "frame {i} has {} joint rotations, frame 0 has {joints}",
                    f.theta.len()
                )));
            }
            let finite = f.r.iter().chain(&f.gamma).chain(f.theta.iter().flatten());
            if !finite.into_iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidMotion(format!("frame {i} has non-finite entries")));
            }
            for block in std::iter::once(&f.gamma).chain(&f.theta) {
                rot6d_to_matrix(block)
                    .map_err(|e| Error::InvalidMotion(format!("frame {i}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for f in &self.frames {
            out.extend_from_slice(&f.r);
            out.extend_from_slice(&f.gamma);
            for t in &f.theta {
                out.extend_from_slice(t);
            }
        }
        out
    }

    /// Inverse of [`MotionSequence::to_flat`] for a known joint count. Does
    /// not validate rotations, so optimizer iterates can pass through.
    pub fn from_flat(fps: f64, joints: usize, flat: &[f64]) -> Result<Self> {
        let dim = frame_dim(joints);
        if flat.is_empty() || !flat.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                got: flat.len(),
            });
        }
        let frames = flat
            .chunks_exact(dim)
            .map(|chunk| {
                let mut r = [0.0; 3];
                r.copy_from_slice(&chunk[..3]);
                let mut gamma = [0.0; 6];
                gamma.copy_from_slice(&chunk[GAMMA_OFFSET..THETA_OFFSET]);
                let theta = chunk[THETA_OFFSET..]
                    .chunks_exact(6)
                    .map(|c| {
                        let mut t = [0.0; 6];
                        t.copy_from_slice(c);
                        t
                    })
                    .collect();
                Frame { r, gamma, theta }
            })
            .collect();
        Ok(MotionSequence { fps, frames })
    }

    pub fn translations(&self) -> Vec<[f64; 3]> {
        self.frames.iter().map(|f| f.r).collect()
    }
}
