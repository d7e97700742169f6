use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("map dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),

    #[error("map must have at least one pixel")]
    EmptyMap,

    #[error("k must be in 1..={max}, got {k}")]
    InvalidK { k: usize, max: usize },

    #[error("{what} must be finite")]
    NonFinite { what: &'static str },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("only {achievable} mutually separated pixels exist, {requested} requested")]
    DiversityShortfall { requested: usize, achievable: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("attack error: {0}")]
    Attack(String),
}

impl CoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        CoreError::Parse { path: path.into(), detail: detail.into() }
    }
}
