use thiserror::Error;

/// Failures surfaced by the library.
///
/// The three families map onto distinct process exit codes in the CLI:
/// malformed input, an unmet construction precondition, and a failed internal
/// verification (which indicates a bug).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid metric: {0}")]
    Metric(MetricViolation),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("precondition unmet: {0}")]
    Precondition(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn verification(msg: impl Into<String>) -> Self {
        Error::Verification(msg.into())
    }
}

/// The first metric axiom found to fail, with the offending indices.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricViolation {
    #[error("distance table is empty")]
    Empty,
    #[error("row {row} has length {len}, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("entry ({0},{1}) is negative or not a finite number")]
    BadEntry(usize, usize),
    #[error("nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),
    #[error("zero distance between distinct points ({0},{1})")]
    ZeroOffDiagonal(usize, usize),
    #[error("asymmetry at ({0},{1})")]
    Asymmetry(usize, usize),
    #[error("triangle violation ({0},{1},{2}): d({0},{2}) > d({0},{1}) + d({1},{2})")]
    Triangle(usize, usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
