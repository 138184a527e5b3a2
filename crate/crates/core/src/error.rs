use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Evaluation landed on (or too close to) a zero of the decaying solution.
    #[error("pole: {0}")]
    Pole(String),
    /// The requested tolerance could not be met; `value` is the best effort.
    #[error("accuracy {estimate:e} above target {target:e} (best value {value:e})")]
    Accuracy { value: f64, estimate: f64, target: f64 },
    #[error("unsupported method: {0}")]
    Unsupported(String),
    /// A series hit its term cap before meeting the stopping rule.
    #[error("series truncated after {terms} terms (next term {estimate:e})")]
    Truncation { terms: usize, estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
