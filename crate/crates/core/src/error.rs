use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("grid error at {timestamp}: {message}")]
    Grid { timestamp: String, message: String },

    #[error("range error: {0}")]
    Range(String),

    #[error("uniqueness error: duplicate pattern {0:?}")]
    Uniqueness(String),

    #[error("lookup error: no glycemic table entry matches {0:?}")]
    Lookup(Vec<String>),

    #[error("imputation error: no donor values for feature {0}")]
    Imputation(String),

    #[error("encoding error: feature {0} has zero variance")]
    Encoding(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("spec error: {0}")]
    Spec(String),

    #[error("numerical error at step {step}: {message}")]
    Numerical { step: usize, message: String },

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("identity error: tester {0} is present in the pool")]
    Identity(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {}: {cause}", path.display())]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}
