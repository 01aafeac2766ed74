use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot serialize sentence {sentence}: {message}")]
    Serialize { sentence: usize, message: String },

    #[error("cleansing {edu_id}: {message}")]
    Cleanse { edu_id: String, message: String },

    #[error("conversion of {edu_id}: {message}")]
    Convert { edu_id: String, message: String },

    #[error("illegal transition {transition} in configuration {configuration}")]
    IllegalTransition {
        transition: String,
        configuration: String,
    },

    #[error("oracle cannot reproduce the gold tree: {0}")]
    Oracle(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
