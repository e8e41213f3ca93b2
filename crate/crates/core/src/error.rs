use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("column {0} is identically zero")]
    ZeroColumn(usize),

    #[error("operation requires a {0} sensing matrix")]
    WrongVariant(&'static str),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("support columns are linearly dependent")]
    RankDeficient,

    #[error("index {0} is already in the support")]
    DuplicateIndex(usize),

    #[error("index {0} out of range for dimension {1}")]
    IndexOutOfRange(usize, usize),

    #[error("extension by column {index} is degenerate (Schur complement {xi:e})")]
    DegenerateExtension { index: usize, xi: f64 },

    #[error("dimension {n} exceeds the exhaustive-enumeration limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
