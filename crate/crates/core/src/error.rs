use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A right-hand side or intermediate quantity became NaN or infinite.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("numerical failure: {message} (best residual {best_residual:e})")]
    NumericalFailure { message: String, best_residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported dimension {0}: at most 4 is supported")]
    UnsupportedDimension(usize),

    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Precondition(_) | Error::UnsupportedDimension(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
