use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation
    /// (zero supports, non-positive similarity, coefficient ≤ 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid run configuration (threshold, μ, memory budget, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input data.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A configured resource limit was exceeded (oracle entry budget,
    /// external-memory budget).
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The operation is not defined for the given measure.
    #[error("unsupported measure: {0}")]
    Unsupported(String),

    /// I/O failure, annotated with the file involved.
    #[error("I/O error on {path}: {source}")]
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
}

pub type Result<T> = std::result::Result<T, Error>;
