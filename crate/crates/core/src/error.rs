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

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("cannot parse {value:?} at row {row}, column {column}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dataset needs at least two classes, found {0}")]
    SingleClass(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature index {index} out of range (m = {m})")]
    FeatureOutOfRange { index: usize, m: usize },

    #[error("feature {0} is already selected")]
    AlreadySelected(usize),

    #[error("k = {k} must be in 1..={m}")]
    InvalidK { k: usize, m: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate Friedman statistic: N(s-1) - chi2 = {0} <= 0")]
    DegenerateFriedman(f64),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment (missing files, unreadable
    /// streams) as opposed to invalid inputs or parameters.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv { source, .. } => matches!(source.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
