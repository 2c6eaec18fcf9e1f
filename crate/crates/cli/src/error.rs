use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, std::io::Error),

    #[error("{}: {}", .0.display(), .1)]
    Dataset(PathBuf, dsenlg::Error),

    #[error("{}: {}", .0.display(), .1)]
    Json(PathBuf, serde_json::Error),

    #[error("{0}")]
    Stats(String),

    #[error(transparent)]
    Core(#[from] dsenlg::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
