use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: data row {row} (line {line}) has a missing value")]
    MissingValue { path: PathBuf, row: usize, line: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("need {needed} rows, only {available} available")]
    TooFewRows { needed: usize, available: usize },

    #[error("degenerate kernel matrix: {0}")]
    DegenerateKernel(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("every balanced subset was too small to train on")]
    NoUsableSubset,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
