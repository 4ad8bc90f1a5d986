use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector must have at least one entry")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entry {index} is not strictly positive (value {value})")]
    NonPositive { index: usize, value: f64 },
    #[error("invalid normalizer: {0}")]
    InvalidNormalizer(String),
    #[error("malformed operator: {0}")]
    MalformedOperator(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("operator is not positively homogeneous")]
    NotHomogeneous,
    #[error("operator does not commute with translations along the seminorm kernel")]
    KernelIncompatible,
    #[error("operator is not order preserving")]
    NotOrderPreserving,
    #[error("operator is not additively homogeneous")]
    NotAdditivelyHomogeneous,
    #[error("invalid game graph: {0}")]
    InvalidGame(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("linear program failed: {0}")]
    LinearProgram(String),
}

pub type Result<T> = std::result::Result<T, Error>;
