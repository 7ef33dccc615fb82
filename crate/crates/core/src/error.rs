use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid document {doc_id}: {}", .violations.join("; "))]
    InvalidDocument { doc_id: String, violations: Vec<String> },

    #[error("ontology error: {0}")]
    Ontology(String),

    #[error("unknown event id {0}")]
    UnknownEvent(String),

    #[error("augmentation error: {0}")]
    Augmentation(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("token {0:?} is not in the model vocabulary")]
    OutOfVocabulary(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("synthetic corpus error: {0}")]
    Synth(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

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

    /// True for errors caused by bad input data rather than a program fault.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Model(_) | Error::Inference(_))
    }
}
