use thiserror::Error;

/// Errors raised by mesh handling, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mesh validation failed: {0}")]
    Validation(String),
    #[error("degenerate geometry in cell {cell}: {msg}")]
    Geometry { cell: usize, msg: String },
    #[error("partition error: {0}")]
    Partition(String),
    #[error("degenerate subdomain edge ({i},{j}): {msg}")]
    DegenerateEdge { i: usize, j: usize, msg: String },
    #[error("singular {what}: {msg}")]
    Singular { what: String, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Krylov breakdown after {iterations} iterations: {msg}")]
    Breakdown { iterations: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
