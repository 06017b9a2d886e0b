use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input violates a mathematical hypothesis (asymmetry, singular W, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An exhaustive oracle would need more evaluations than its cap allows.
    #[error("exhaustive enumeration needs {required} evaluations, cap is {cap}")]
    Infeasible { required: u128, cap: u128 },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
