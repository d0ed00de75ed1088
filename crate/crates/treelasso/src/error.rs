use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of matrices, trees, or vectors do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is unusable (non-finite values, constant columns, ...).
    #[error("input error: {0}")]
    Input(String),

    /// The inner linear solve failed.
    #[error("solver error: {0}")]
    Solver(String),

    /// A file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
