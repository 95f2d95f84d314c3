use thiserror::Error;

/// Errors raised by the numerical pipeline and the dataset readers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sample list is empty")]
    EmptySamples,

    #[error("non-finite value {0} in input")]
    NonFinite(f64),

    #[error("invalid domain map scale {0}: must be finite and nonzero")]
    InvalidScale(f64),

    #[error("basis degree {degree} outside supported range 1..={max}")]
    InvalidDegree { degree: usize, max: usize },

    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("moment order {have} is too low, need at least {need}")]
    InsufficientMomentOrder { have: usize, need: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("symmetric eigensolver did not converge")]
    EigenFailure,

    #[error("bag {bag_id}: Gram matrix is not positive definite ({distinct} distinct x values for dx = {degree})")]
    InsufficientRank {
        bag_id: String,
        distinct: usize,
        degree: usize,
    },

    #[error("conditional Gram matrix is singular: {0}")]
    SingularConditionalGram(Box<Error>),

    #[error("dataset has {bags} bags, fewer than dy = {degree}")]
    TooFewBags { bags: usize, degree: usize },

    #[error("bag {bag_id} has {size} observations, fewer than dx = {degree}")]
    BagTooSmall {
        bag_id: String,
        size: usize,
        degree: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset file is empty")]
    EmptyDataset,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the linear algebra (rank or eigen problems), as
    /// opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::EigenFailure
                | Error::InsufficientRank { .. }
                | Error::SingularConditionalGram(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
