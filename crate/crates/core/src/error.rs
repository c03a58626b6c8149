use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input file is empty or has no data rows")]
    EmptyFile,
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric cell `{value}` at row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("classification response has more than two distinct labels ({0:?} ...)")]
    MulticlassLabels(Vec<String>),
    #[error("classification schema needs a positive_label")]
    MissingPositiveLabel,

    #[error("regression responses are all equal ({0}); cannot scale to [-1, 1]")]
    DegenerateResponse(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need more than {k} rows for the {k}-th nearest neighbour, have {rows}")]
    TooFewRows { rows: usize, k: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid kernel weights {0:?}: must be nonnegative and sum to 1")]
    InvalidSimplex(Vec<f64>),

    #[error("only {available} unselected candidates left, asked for {requested}")]
    Exhausted { available: usize, requested: usize },
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("solver did not converge in {0} iterations")]
    NoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user configuration rather than by the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::InvalidSimplex(_)
                | Error::MissingPositiveLabel
                | Error::Parse { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
