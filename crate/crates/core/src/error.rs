use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no modalities")]
    NoModalities,

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("invalid option space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("modality count mismatch: expected {expected}, got {actual}")]
    ModalityMismatch { expected: usize, actual: usize },

    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),

    #[error("action {0:?} not accepted by this environment")]
    InvalidAction(Option<usize>),

    #[error("framework mismatch: {0}")]
    Framework(String),

    #[error("transition row for state {state}, action {action} sums to {sum}")]
    NotStochastic { state: usize, action: usize, sum: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("truncated metrics file {path}: {message}")]
    Truncated { path: PathBuf, message: String },

    #[error("seed mismatch between reports at row {row}: {a} vs {b}")]
    SeedMismatch { row: usize, a: u64, b: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn out_of_range(
        what: &'static str,
        value: impl ToString,
        range: impl Into<String>,
    ) -> Self {
        Error::OutOfRange {
            what,
            value: value.to_string(),
            range: range.into(),
        }
    }

    /// True for failures caused by the filesystem rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
