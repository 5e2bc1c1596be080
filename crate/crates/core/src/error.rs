use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("index {index} out of range (limit {limit})")]
    InvalidIndex { index: usize, limit: usize },
    #[error("dense export of dimension {dim} exceeds threshold {threshold}")]
    DenseThreshold { dim: usize, threshold: usize },
    #[error("operator is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
