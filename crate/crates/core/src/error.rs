use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("location ({x:.3}, {y:.3}) km lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("unknown location {0}")]
    UnknownLocation(u32),

    #[error("speed must be positive, got {0} km/min")]
    NonPositiveSpeed(f64),

    #[error("road graph is not strongly connected")]
    Disconnected,

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("forecast horizon mismatch: supply has {supply} steps, demand has {demand}")]
    HorizonMismatch { supply: usize, demand: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint layout mismatch: checkpoint is {found}, scenario needs {expected}")]
    LayoutMismatch { found: String, expected: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used by the command-line front-end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) | Error::Config(_) | Error::NonPositiveSpeed(_) => "config",
            Error::OutOfBounds { .. } | Error::UnknownLocation(_) | Error::Disconnected => "model",
            Error::Parse { .. } => "parse",
            Error::HorizonMismatch { .. } => "model",
            Error::LayoutMismatch { .. } | Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
        }
    }
}
