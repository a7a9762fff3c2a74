use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SurvError>;

#[derive(Debug, Error)]
pub enum SurvError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error at row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("exp(x.beta) overflows for row {row}")]
    Overflow { row: usize },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("training error: {0}")]
    Training(String),
}

impl SurvError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SurvError::Io {
            path: path.into(),
            source,
        }
    }
}
