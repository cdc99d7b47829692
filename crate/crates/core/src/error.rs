use std::path::PathBuf;

use thiserror::Error;

use crate::model::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid field: {0}")]
    Field(String),

    #[error("{0}")]
    Param(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("explicit step dt = {dt:e} exceeds stability limit {limit:e}")]
    Unstable { dt: f64, limit: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("run diverged at t = {t}: {reason}")]
    Diverged {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
