use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the toolkit.
///
/// Variants fall into two families: validation problems (bad input, schema,
/// geometry) and numerical failures (singular systems, non-convergence).
/// [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite value in {path} at byte offset {offset}")]
    NonFiniteInFile { path: PathBuf, offset: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("mesh id mismatch: operator built for {expected:016x}, field lives on {got:016x}")]
    MeshMismatch { expected: u64, got: u64 },

    #[error("missing node group `{0}`")]
    MissingGroup(String),

    #[error("curve `{0}` is not a closed loop")]
    OpenCurve(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("morph inverted {count} triangle(s), first at index {first}")]
    InvertedTriangles { count: usize, first: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Numerical(_) | Error::InvertedTriangles { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
