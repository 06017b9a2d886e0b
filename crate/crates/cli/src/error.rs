use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration or a command-line argument is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] gsp_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// A result row failed its write-time check.
    #[error("result check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration problems, 3 when an exhaustive oracle is over its cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(gsp_core::Error::Parameter(_)) => 2,
            CliError::Core(gsp_core::Error::Infeasible { .. }) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}
