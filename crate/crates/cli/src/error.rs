use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{key}: {detail}")]
    Key { key: &'static str, detail: String },

    #[error("{0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{what} deviation {deviation:e} exceeds {tolerance:e}")]
    Deviation {
        what: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error(transparent)]
    Core(#[from] fenlo_core::Error),
}

impl CliError {
    pub fn key(key: &'static str, detail: impl Into<String>) -> Self {
        CliError::Key {
            key,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for bad configuration or input, 2 for a numeric abort.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Deviation { .. } => 2,
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
