use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("required file not found: {0}")]
    MissingFile(PathBuf),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    UnparseableNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value {value:?} is not declared in the schema")]
    UndeclaredCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: label value {value:?} is neither a declared normal nor anomaly value")]
    UnclassifiableLabel { row: usize, value: String },

    #[error("non-finite value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient {class} rows: need {needed}, have {available}")]
    InsufficientRows {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("invalid sample-set spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}, step {step}: objective = {objective}")]
    Diverged {
        epoch: usize,
        step: usize,
        objective: f64,
    },

    #[error("evaluation needs at least one anomaly and one normal score")]
    SingleClass,

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<bincode::Error> for Error {
    fn from(e: bincode::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
