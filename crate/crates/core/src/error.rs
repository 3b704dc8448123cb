use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("distribution has unbounded support")]
    UnboundedSupport,

    #[error("pricing-query budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("the hint sample was already drawn from this oracle")]
    HintAlreadyConsumed,

    /// A runtime check of an analytic guarantee failed (round bound, pivot windows).
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("class check failed: {0}")]
    ClassCheckFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
