//! Crate-wide error type.

/// Errors produced by tensor operations, layers, and experiment runners.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid axis {axis} for tensor of rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("division by near-zero at {count} position(s), first at flat index {first}")]
    DivisionByZero { count: usize, first: usize },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("attention row {row} has no unmasked key (fully masked)")]
    FullyMaskedRow { row: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("cross-entropy is infinite: q is zero at index {index} where p > 0")]
    InfiniteLoss { index: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("function is non-finite at probe point (parameter {param}, flat index {index})")]
    NonFiniteProbe { param: usize, index: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("bad file format: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
