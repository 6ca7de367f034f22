//! Error type shared across the library.

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by dataset validation, policy application, and solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A logged propensity fell below the overlap floor η.
    #[error("overlap violation at record {index}: propensity {propensity} < eta {eta}")]
    OverlapViolation {
        index: usize,
        propensity: f64,
        eta: f64,
    },

    /// A logged reward fell outside the declared reward range.
    #[error("reward range violation at record {index}: reward {reward} outside [{lo}, {hi}]")]
    RewardRangeViolation {
        index: usize,
        reward: f64,
        lo: f64,
        hi: f64,
    },

    /// Vectors/matrices making up a dataset disagree on length, or an
    /// action id is outside {1..d}, or the dataset is empty.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A context passed to a policy has the wrong length.
    #[error("dimension mismatch: expected context length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The evaluated policy matches no logged action; the importance-weighted
    /// estimator is undefined on such data.
    #[error("policy matches no logged action; evaluation is undefined")]
    NoMatch,

    /// The dual variable must be strictly positive.
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),

    /// A quantity that requires an interior dual solution was requested for a
    /// boundary (alpha -> 0) solution.
    #[error("dual solution lies on the alpha -> 0 boundary")]
    BoundarySolution,

    /// A scalar parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Malformed numeric or structural content in an input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// CSV layer failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid input data or parameters (as opposed
    /// to I/O failures). Used by callers to pick exit codes.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Csv(_) | Error::Io(_))
    }
}
