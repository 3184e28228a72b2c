use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("domain violation in coordinate {coordinate}: {reason}")]
    Domain { coordinate: usize, reason: String },

    #[error("jet of order {requested} not available (model provides up to {available})")]
    Capability { requested: usize, available: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("rank deficient family: {0}")]
    Rank(String),

    #[error("numerical consistency failure: {0}")]
    Numerical(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
