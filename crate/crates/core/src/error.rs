use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("inconsistent time variables: {stage} is negative ({value})")]
    Consistency { stage: &'static str, value: f64 },
    #[error("records are not in chronological order at position {0}")]
    Ordering(usize),
    #[error("insufficient history: need at least {needed} records, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("state index {index} out of range for {states} states")]
    StateIndex { index: usize, states: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("forecast unavailable: {0}")]
    ForecastUnavailable(String),
    #[error("invalid input: {0}")]
    Input(String),
}

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Input(_) | Error::StateIndex { .. } | Error::Dimension(_) => {
                ErrorKind::Validation
            }
            Error::Schema(_)
            | Error::Consistency { .. }
            | Error::Ordering(_)
            | Error::InsufficientHistory { .. }
            | Error::Degenerate(_) => ErrorKind::Data,
            Error::NonFinite(_)
            | Error::Singular(_)
            | Error::NotPsd(_)
            | Error::ForecastUnavailable(_) => ErrorKind::Numeric,
        }
    }
}
