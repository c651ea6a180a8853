use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node index out of range: {index} (graph has {n} nodes)")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("self-tie ({0}, {0}) is not allowed")]
    SelfTie(usize),

    #[error("term `{term}` requires a {required} graph")]
    Direction {
        term: String,
        required: &'static str,
    },

    #[error("unknown nodal attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("enumeration cap exceeded: {0}")]
    EnumerationCap(String),

    #[error("formula error at column {col}: {msg}")]
    Formula { col: usize, msg: String },

    #[error("{0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
