use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain where a formula or construction is defined.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A requested configuration that is documented as unsupported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A nonlinearity produced a non-finite value on its probe grid.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A hypothesis check (growth near zero, supercritical structure, sign
    /// conditions) failed numerically.
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    /// An iterative method did not converge within its budget.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The functional has no mountain-pass geometry along the initial path.
    #[error("mountain-pass geometry absent: {0}")]
    Geometry(String),

    /// Internal invariant violated; indicates a violated precondition upstream.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
