use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("channel matrix of user {user} is all-zero")]
    ZeroChannel { user: usize },

    #[error("BPSK mapping needs binary alphabets, user {user} has {size} symbols")]
    UnsupportedAlphabet { user: usize, size: usize },

    #[error("channel Gram matrix is rank deficient (condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("regularized channel Gram matrix is numerically singular")]
    SingularRegularizedMatrix,

    #[error("symbol {symbol} of user {user} leaves an empty hypothesis set")]
    EmptyHypothesisSet { user: usize, symbol: usize },

    #[error("cannot project an all-zero constellation")]
    ZeroConstellation,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("constellation is not plottable: {0}")]
    Unplottable(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroChannel { .. } => "ZeroChannel",
            Error::UnsupportedAlphabet { .. } => "UnsupportedAlphabet",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::SingularRegularizedMatrix => "SingularRegularizedMatrix",
            Error::EmptyHypothesisSet { .. } => "EmptyHypothesisSet",
            Error::ZeroConstellation => "ZeroConstellation",
            Error::UnknownScenario(_) => "UnknownScenario",
            Error::Unplottable(_) => "Unplottable",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Io { .. } => "IoError",
        }
    }

    /// Process exit code: 1 for configuration/input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient { .. }
            | Error::SingularRegularizedMatrix
            | Error::EmptyHypothesisSet { .. }
            | Error::ZeroConstellation
            | Error::ZeroChannel { .. } => 2,
            _ => 1,
        }
    }
}
