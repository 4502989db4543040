use std::io;
use std::path::PathBuf;

use opforecast_core::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] opforecast_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// 1 validation, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) => match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
            AppError::Config(_) | AppError::Snapshot(_) => 1,
            AppError::Io { .. } | AppError::Csv(_) | AppError::Json(_) => 2,
        }
    }
}
