use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the formation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Two points that must be separated are (numerically) coincident.
    #[error("degenerate geometry: inter-vehicle distance {distance:e} m is below {threshold:e} m")]
    DegenerateGeometry { distance: f64, threshold: f64 },

    /// The QP cost matrix is not symmetric positive definite.
    #[error("ill-conditioned QP cost matrix (smallest eigenvalue {min_eigenvalue:e})")]
    IllConditioned { min_eigenvalue: f64 },

    #[error("label {label} is the out-of-view label and has no bearing center")]
    OutOfFovLabel { label: usize },

    /// Sigma clipping rejected every pixel of a depth patch.
    #[error("sigma clipping removed every depth sample")]
    AllClipped,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
