use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown tag {0:?}")]
    UnknownTag(String),

    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),

    #[error("schema error at record {record}: {message}")]
    Schema { record: usize, message: String },

    #[error("sentence {0:?} has no gold labels")]
    MissingGold(String),

    #[error("invalid sentence: {0}")]
    InvalidSentence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("language mismatch: expected {expected:?}, got {found:?}")]
    LanguageMismatch { expected: String, found: String },

    #[error("{0}")]
    NoExample(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("annotator failure: {0}")]
    Annotator(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
