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

    #[error("{path}: malformed numeric content at line {line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },

    #[error("{0}: zero-length record")]
    EmptyRecord(PathBuf),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown class directory `{0}`")]
    UnknownClass(String),

    #[error("duplicate record id `{0}`")]
    DuplicateRecord(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint digest {found:016x} does not match model spec digest {expected:016x}")]
    DigestMismatch { expected: u64, found: u64 },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
