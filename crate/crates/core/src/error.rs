use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}:{col}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        col: usize,
        message: String,
    },

    #[error("no application sources found under {0}")]
    EmptyProject(PathBuf),

    #[error("no try-catch site with id `{0}`")]
    SiteNotFound(String),

    #[error("stale inventory: recorded fingerprint {expected}, project now hashes to {actual}")]
    StaleInventory { expected: String, actual: String },

    #[error("{0} is already instrumented")]
    AlreadyInstrumented(PathBuf),

    #[error("could not launch `{command}`: {message}")]
    Launch { command: String, message: String },

    #[error("corrupt trace {path}: {message}")]
    TraceCorruption { path: PathBuf, message: String },

    #[error("malformed junit report {path}: {message}")]
    Junit { path: PathBuf, message: String },

    #[error("baseline test suite is red; failing tests: {}", .0.join(", "))]
    RedBaseline(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid glob pattern: {0}")]
    Glob(#[from] globset::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
