use thiserror::Error;

/// Errors raised anywhere in the inversion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A trial model with a non-physical entry. Line searches treat this as a
    /// signal to backtrack.
    #[error("invalid model: entry {index} has value {value:e}")]
    InvalidModel { index: usize, value: f64 },

    #[error("numerical failure at omega = {omega} rad/s: {reason}")]
    NumericalFailure { omega: f64, reason: String },

    #[error("subproblem solver diverged: {0}")]
    Divergence(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn config_err<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Config {
        field: field.to_string(),
        message: message.into(),
    })
}
