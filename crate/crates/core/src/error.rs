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
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column {0:?} not found in header")]
    ColumnNotFound(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("missing value at ({row},{col})")]
    MissingValue { row: usize, col: usize },
    #[error("non-numeric value {value:?} at ({row},{col})")]
    NonNumeric { row: usize, col: usize, value: String },
    #[error("label not binary: {value:?} at row {row}")]
    LabelNotBinary { row: usize, value: String },
    #[error("negative count {value} at ({row},{col}); log(1+x) needs x >= 0")]
    NegativeCount { row: usize, col: usize, value: f64 },
    #[error("column {0:?} is constant")]
    ConstantColumn(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("response must be binary (0/1)")]
    NonBinaryResponse,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate estimator input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
