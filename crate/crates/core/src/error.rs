use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A span boundary does not coincide with a unit boundary.
    #[error("span [{begin}, {end}) of class {klass} does not align with token boundaries")]
    Alignment {
        begin: usize,
        end: usize,
        klass: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Training produced a non-finite objective.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("operation not supported for this model kind: {0}")]
    ModelKind(String),

    #[error("state space too large: {0}")]
    Size(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
