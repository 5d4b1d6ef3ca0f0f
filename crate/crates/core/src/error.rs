//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),

    #[error("transport failure for model {model}: {reason}")]
    Transport { model: String, reason: String },

    #[error("api rejected request for model {model} (status {status}): {detail}")]
    Api {
        model: String,
        status: u16,
        detail: String,
    },

    #[error("mock script error: {0}")]
    Script(String),

    #[error("malformed completion: reasoning block opened but never closed")]
    MalformedCompletion { raw: String },

    #[error("judge returned non-conforming output after {attempts} attempts: {detail}")]
    JudgeFormat { attempts: u32, detail: String },

    #[error("taxonomy error: {0}")]
    Taxonomy(String),

    #[error("injection plan error: {0}")]
    Plan(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("resume error: {0}")]
    Resume(String),

    #[error("journal error: {0}")]
    Journal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Transport-class failures are the only ones worth retrying.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}
