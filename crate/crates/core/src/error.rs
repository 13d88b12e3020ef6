use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("degree {degree} exceeds the configured cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },

    #[error("integrability check failed: {0}")]
    Integrability(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("tree with {steps} steps is outside the supported range 1..={cap}")]
    TreeSize { steps: usize, cap: usize },

    #[error("invalid random time: {0}")]
    InvalidRandomTime(String),

    #[error("random time is not honest (fails at t = {time})")]
    NotHonest { time: usize },

    #[error("division by zero outside the flagged null set at step {step}")]
    Degenerate { step: usize },

    #[error("time {0} is outside [0, 1)")]
    TimeOutOfRange(f64),

    #[error("function is not nondecreasing on the tested grid")]
    NotMonotone,

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("degenerate feature: {0}")]
    DegenerateFeature(String),

    #[error("non-finite sample value")]
    NonFinite,

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
