use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions or an invalid model/experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Training diverged or produced a non-finite quantity.
    #[error("training error: {0}")]
    Training(String),

    /// A metric or estimator was asked for a value that is undefined on its input.
    #[error("undefined metric: {0}")]
    Undefined(String),

    /// A caller referenced a head, option, kind or feature that does not exist.
    #[error("unknown {what}: {name}")]
    Unknown { what: &'static str, name: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("serialization error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A harness stage failed; wraps the underlying cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn unknown(what: &'static str, name: impl Into<String>) -> Self {
        Error::Unknown {
            what,
            name: name.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
