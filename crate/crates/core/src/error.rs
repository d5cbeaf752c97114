use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("TIFF error: {0}")]
    Tiff(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("band `{0}` not found")]
    BandNotFound(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("requested region does not intersect the grid")]
    EmptyRegion,

    #[error("median composite requested over an empty stack")]
    EmptyStack,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid ring: {0}")]
    InvalidRing(String),

    #[error("no such unit: {0}")]
    NoSuchUnit(String),

    #[error("CRS mismatch: ROI is {roi}, grid is {grid}")]
    CrsMismatch { roi: String, grid: String },

    #[error("manifest entry {index}: {message}")]
    Manifest { index: usize, message: String },

    #[error("vector dataset: {0}")]
    Dataset(String),

    #[error("transport error (retryable): {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("invalid data: {0}")]
    InvalidData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<tiff::TiffError> for Error {
    fn from(e: tiff::TiffError) -> Self {
        match e {
            tiff::TiffError::IoError(source) => Error::Io {
                path: PathBuf::new(),
                source,
            },
            other => Error::Tiff(other.to_string()),
        }
    }
}
