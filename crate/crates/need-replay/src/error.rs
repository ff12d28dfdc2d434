use thiserror::Error;

/// Errors raised by replay structures, environments and agents.
#[derive(Debug, Error)]
pub enum Error {
    #[error("priority must be nonnegative, got {0}")]
    NegativePriority(f64),
    #[error("priority queue is empty")]
    EmptyQueue,
    #[error("index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("total priority mass is zero, nothing to sample")]
    NoMass,
    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("goal is not reachable from the start state")]
    Unreachable,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("gradient contains non-finite values")]
    NonFiniteGradient,
    #[error("target feature vector has zero norm")]
    DegenerateFeature,
    #[error("minibatch of {requested} requested but buffer holds {available}")]
    InsufficientData { requested: usize, available: usize },
    #[error("linear solve failed: {0}")]
    Numerical(String),
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
