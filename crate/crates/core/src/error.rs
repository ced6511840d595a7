use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {}: {message}", path.display())]
    Codec { path: PathBuf, message: String },

    #[error("unsupported bit depth: {0}")]
    UnsupportedDepth(String),

    #[error("image too small: {width}x{height} (need at least 2x2)")]
    ImageTooSmall { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("disparity exceeds encoding range: {0} at pixel index {1}")]
    DisparityOverflow(f64, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate road fit: {0}")]
    DegenerateFit(String),

    #[error("too few valid pixels: found {found}, need at least {needed}")]
    TooFewValid { found: usize, needed: usize },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("no overlapping valid pixels between estimate and ground truth")]
    NoOverlap,

    #[error("all histogram vectors excluded from clustering")]
    AllExcluded,

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("negative ground-truth disparity {value} at ({u}, {v})")]
    NegativeDisparity { value: f64, u: usize, v: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
