use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("degenerate target column `{column}`: variance {variance:e} is below the floor")]
    DegenerateTarget { column: String, variance: f64 },

    #[error("degenerate input feature `{feature}`: min equals max ({value})")]
    DegenerateFeature { feature: String, value: f64 },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("surrogate profile rejected: {0}")]
    Profile(String),

    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("malformed {what} file: {message}")]
    Format { what: &'static str, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }
}
