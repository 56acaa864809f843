use thiserror::Error;

/// Errors raised by the library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A point, index or value outside the admissible domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The map was applied at a point outside its certification domain
    /// (truncation edge of a gallery space).
    #[error("boundary error: {0}")]
    Boundary(String),

    /// A construction parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A test function evaluated outside its declared codomain or class.
    #[error("test-function error: {0}")]
    TestFunction(String),

    /// Input too small for the requested computation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
