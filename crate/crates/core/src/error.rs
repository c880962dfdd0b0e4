use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Broad failure classes, used by the command-line front end to choose an
/// exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Schema,
    /// Parameters that cannot be satisfied by the data.
    Infeasible,
    /// Filesystem problems.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("utterance {utterance}, token {token}: expected {expected}-dimensional prosody vector, got {found}")]
    Dimension {
        utterance: String,
        token: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate utterance id {0:?}")]
    Duplicate(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("codebook mismatch: {0}")]
    CodebookMismatch(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("cannot log-transform predictor {predictor:?} for word {word:?}: value {value}")]
    Transform {
        predictor: String,
        word: String,
        value: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::InsufficientData(_)
            | Error::Infeasible(_)
            | Error::Singular(_)
            | Error::Coverage(_)
            | Error::EmptyInput(_) => ErrorKind::Infeasible,
            Error::Parse { .. }
            | Error::Dimension { .. }
            | Error::Duplicate(_)
            | Error::Schema(_)
            | Error::InvalidInput(_)
            | Error::Config(_)
            | Error::CodebookMismatch(_)
            | Error::Format(_)
            | Error::Transform { .. } => ErrorKind::Schema,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
