use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("orbit diverged (|coordinate| exceeded {bound})")]
    Divergent { bound: f64 },
    #[error("point cloud collapsed to a single point")]
    Degenerate,
    #[error("no system reached filling rate {threshold} after {attempts} attempts")]
    SearchExhausted { threshold: f64, attempts: usize },
    #[error("category {category}: {source}")]
    Category {
        category: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed {kind} file {path}: {msg}")]
    Format {
        kind: &'static str,
        path: PathBuf,
        msg: String,
    },
    #[error("io error at {path}: {source}")]
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

    pub(crate) fn format(kind: &'static str, path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            path: path.into(),
            msg: msg.into(),
        }
    }
}
