use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    /// A gradient was requested at a configuration that lies on the contact set.
    #[error("CDF gradient undefined at distance {distance:e} (contact tolerance {tolerance:e})")]
    GradientUndefined { distance: f64, tolerance: f64 },

    #[error("field file: missing or truncated section `{section}`")]
    FieldTruncated { section: &'static str },

    #[error("field file: unsupported format tag {found:?} (expected \"CDF1\")")]
    FieldVersion { found: [u8; 4] },

    #[error("field file: {0}")]
    FieldMalformed(String),

    #[error("trajectory csv: {0}")]
    TrajectoryCsv(String),

    #[error("trial generation gave up after {attempts} attempts: {predicate}")]
    RejectionBudget { attempts: u64, predicate: String },

    #[error("unsupported dimension {0} (only 2D configuration spaces can be rendered)")]
    UnsupportedDimension(usize),

    #[error("configuration errors:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),

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

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
