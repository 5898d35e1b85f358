use thiserror::Error;

/// Errors raised while configuring or running a reduced-order simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration. `field` names the offending key.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Operator or vector sizes do not fit together.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A factorization broke down or a solve produced garbage.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
