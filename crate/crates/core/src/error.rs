use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    ConfigParse { path: String, line: usize, message: String },

    #[error("{path}: malformed IDX data at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("label mismatch: expected class {expected}, found class {found}")]
    LabelMismatch { expected: usize, found: usize },

    #[error("degenerate gradient: {0}")]
    DegenerateGradient(&'static str),

    #[error("incomplete run: {0}")]
    IncompleteRun(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("task index {index} out of range for a stream of {len} tasks")]
    TaskIndex { index: usize, len: usize },

    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),

    #[error(
        "dataset not found at {path}: download the four Fashion-MNIST IDX files \
         (train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte, \
         t10k-labels-idx1-ubyte), decompress them, and point DRIFTCL_DATA_DIR or \
         `data_dir` at their directory"
    )]
    DatasetMissing { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("self-check failed: {0}")]
    Verification(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the error's category. Stable across releases;
    /// the C API reuses the same numbering.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigParse { .. } => 2,
            Error::Shape { .. } | Error::EmptyInput(_) | Error::LabelMismatch { .. } | Error::TaskIndex { .. } => 3,
            Error::Format { .. } | Error::DatasetMissing { .. } => 4,
            Error::Io { .. } | Error::Json(_) => 5,
            Error::InsufficientData(_)
            | Error::DegenerateGradient(_)
            | Error::UndefinedMetric(_)
            | Error::IncompleteRun(_) => 6,
            Error::IncompatibleRuns(_) => 7,
            Error::Verification(_) => 8,
        }
    }
}
