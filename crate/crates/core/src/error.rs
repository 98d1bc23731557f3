use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    ParseCell {
        /// 1-based data row (the header is row 0).
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: label {value:?} is not 0 or 1")]
    BadLabel { row: usize, value: String },

    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has no labels")]
    Unlabeled,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("k = {k} exceeds the {available} eligible training rows")]
    KTooLarge { k: usize, available: usize },

    #[error("k must be at least 1")]
    ZeroK,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("training row {neighbor} is not a neighbour of target {target}")]
    NotANeighbor { target: usize, neighbor: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing node state for {0}")]
    MissingState(String),

    #[error("AUC needs both classes present")]
    SingleClass,

    #[error("gradient cache does not match the model")]
    StaleCache,

    #[error("model file: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
