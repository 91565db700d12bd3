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

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("line {line}: special token {token:?} occurs in the input")]
    SpecialTokenCollision { line: u64, token: String },

    #[error("malformed annotation at token {position}: {message}")]
    Annotation { position: usize, message: String },

    #[error("constraint has no source span; scheme needs term-base matches")]
    MissingSpan,

    #[error("n-gram pool is empty; cannot draw decoy variants")]
    EmptyPool,

    #[error("corpus length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown system id {0:?}")]
    UnknownSystem(String),

    #[error("pipeline stage {stage} failed on shard {shard} (lines {first}..{last}): {source}")]
    Stage {
        stage: &'static str,
        shard: usize,
        first: u64,
        last: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
