use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus line {line}: {message}")]
    CorpusLine { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown term id {0}")]
    UnknownTerm(usize),

    #[error("term {term} has document frequency 0")]
    ZeroDocFreq { term: usize },

    #[error("vector shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sentence {0} is already selected")]
    AlreadySelected(usize),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("representation {repr} needs a trained {kind} model, none was provided")]
    MissingModel { repr: String, kind: String },

    #[error("document `{0}` has no reference summaries")]
    NoReferences(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
