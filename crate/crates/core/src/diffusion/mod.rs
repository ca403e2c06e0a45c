//! Diffusion noise schedule, forward noising, denoisers and the
//! score-distillation gradient.

pub mod denoiser;
pub mod distill;
pub mod schedule;

pub use denoiser::{Activation, DenseLayer, Denoiser, MlpDenoiser, OracleDenoiser, Projection};
pub use distill::{msds_gradient, msds_gradient_with, FixedDraw, MsdsConfig, MsdsSample, Weighting};
pub use schedule::{noise_with, sample_forward, standard_normal, NoiseSchedule, ScheduleConfig};
