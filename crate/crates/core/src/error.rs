use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition of the called operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The input is larger than the configured cost guard allows.
    #[error("resource limit exceeded: {what} is {got}, limit {limit}")]
    Resource {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// α outside {2/m} ∪ {-1/m}.
    #[error("inadmissible alpha {0}: must be 2/m or -1/m for a positive integer m")]
    InadmissibleAlpha(String),

    /// An eigenvalue escaped the interval allowed for the given α.
    #[error("spectral violation: eigenvalue {eigenvalue} outside [{lower}, {upper}]")]
    Spectral { eigenvalue: f64, lower: f64, upper: f64 },

    /// Inconsistent numerical configuration (quadrature, window, kernel descriptor).
    #[error("configuration error: {0}")]
    Config(String),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
