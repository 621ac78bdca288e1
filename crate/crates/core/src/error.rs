use std::path::PathBuf;

use crate::corpus::Lang;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Dependency,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("embedding format error: {0}")]
    Format(String),

    #[error("embedding alignment error: file has {found} rows, expected {expected}")]
    Alignment { found: usize, expected: usize },

    #[error("non-finite value at row {row} col {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient pool for batch size {batch_size}: need >= {need_pos} positives and >= {need_neg} negatives, have {have_pos} and {have_neg}")]
    Capacity {
        batch_size: usize,
        need_pos: usize,
        need_neg: usize,
        have_pos: usize,
        have_neg: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate schedule: total_steps must be positive")]
    DegenerateSchedule,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("language {0} has a single class in the validation scores")]
    DegenerateLanguage(Lang),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("translation transport error for {url}: {message}")]
    Transport { url: String, message: String },

    #[error("translation provider error: {0}")]
    Provider(String),

    #[error("augmentation failed for example {id}: {source}")]
    Augmentation {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("study failed: {0}")]
    Study(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

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

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Config(_) | Error::Json(_) => ErrorKind::Config,
            Error::Dependency(_) => ErrorKind::Dependency,
            Error::Augmentation { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
