//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Coarse error class used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data or configuration (exit code 1).
    Input,
    /// Failure while simulating or evaluating (exit code 2).
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate table id {0:?}")]
    DuplicateTableId(String),

    #[error("unknown modality {got:?}; legal names are {legal}")]
    UnknownModality { got: String, legal: String },

    #[error("topic {0:?} has no query variants left after filtering")]
    EmptyVariants(String),

    #[error("field weights are all zero; at least one must be positive")]
    AllZeroWeights,

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("unknown table id {0:?}")]
    UnknownTable(String),

    #[error("topic {0:?} has no relevance judgments")]
    TopicWithoutQrels(String),

    #[error("topic {0:?} has no topic query")]
    TopicWithoutQuery(String),

    #[error("malformed session log: action {index} ({kind}): {message}")]
    MalformedLog {
        index: usize,
        kind: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported index format version {found} (expected {expected})")]
    IndexVersion { found: u32, expected: u32 },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("simulation failed for topic {topic}: {message}")]
    Session { topic: String, message: String },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Classify for exit-code mapping: input-data problems vs runtime failures.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DuplicateTableId(_)
            | Error::UnknownModality { .. }
            | Error::EmptyVariants(_)
            | Error::AllZeroWeights
            | Error::EmptyCorpus
            | Error::Config(_)
            | Error::IndexVersion { .. }
            | Error::Json(_) => ErrorKind::Input,
            Error::UnknownTable(_)
            | Error::TopicWithoutQrels(_)
            | Error::TopicWithoutQuery(_)
            | Error::MalformedLog { .. }
            | Error::Eval(_)
            | Error::Session { .. } => ErrorKind::Runtime,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
