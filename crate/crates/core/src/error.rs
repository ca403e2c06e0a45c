use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate rotation: {0}")]
    DegenerateRotation(&'static str),

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("binding topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("invalid body model: {0}")]
    InvalidBody(String),

    #[error("invalid motion: {0}")]
    InvalidMotion(String),

    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    #[error("diffusion step {step} outside 1..={max}")]
    StepOutOfRange { step: usize, max: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("too few frames: need at least {need}, got {got}")]
    TooFewFrames { need: usize, got: usize },

    #[error("collision pair references point {index} but only {len} points exist")]
    StaleIndices { index: usize, len: usize },

    #[error("non-finite optimizer state at iteration {iteration}: {detail}")]
    NonFiniteState { iteration: usize, detail: String },

    #[error("no collision-free path: {0}")]
    NoPathFound(String),

    #[error("need at least two waypoints, got {0}")]
    TooFewWaypoints(usize),

    #[error("trajectory planner unavailable: {0}")]
    PlannerUnavailable(String),

    #[error("planner reply does not match schema: {0}")]
    SchemaError(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid quaternion: {0}")]
    InvalidQuaternion(String),

    #[error("covariance is not positive definite")]
    SingularCovariance,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {context} at line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{context}: unsupported format version {found} (expected {expected})")]
    VersionMismatch {
        context: String,
        found: u32,
        expected: u32,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image encoding failed: {0}")]
    Image(String),
}

impl Error {
    /// Errors caused by malformed or inconsistent user input, as opposed to
    /// failures that happen while running a valid job.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidBody(_)
                | Error::InvalidMotion(_)
                | Error::InvalidSchedule(_)
                | Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::VersionMismatch { .. }
                | Error::ShapeMismatch { .. }
                | Error::LengthMismatch { .. }
                | Error::TooFewFrames { .. }
                | Error::TooFewWaypoints(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidQuaternion(_)
                | Error::TopologyMismatch(_)
                | Error::EmptyMesh
        )
    }

    pub(crate) fn parse(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
