use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("vector is not unit-normalized (norm {0})")]
    NotUnitNormalized(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {index} >= {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("input too large: {got} points exceeds limit {limit}")]
    TooLarge { got: usize, limit: usize },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("corrupt or unsupported file: {0}")]
    CorruptFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
