use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table {path}: {message}")]
    Table { path: PathBuf, message: String },
    #[error("table {0} has no data rows")]
    EmptyTable(PathBuf),
    #[error("column `{0}` not found in table header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: value `{value}` was not seen when the encoding was fitted")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty cell (class {class}, attribute {attribute})")]
    EmptyCell { class: usize, attribute: usize },
    #[error("empty event {0}")]
    EmptyEvent(String),
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("attribute group {0} has no samples")]
    EmptyGroup(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("non-finite training objective at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
