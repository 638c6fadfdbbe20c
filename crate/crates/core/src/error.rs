use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance matrix is not positive semidefinite: {0}")]
    NotPositiveDefinite(String),
    #[error("circulant embedding not nonnegative definite (min eigenvalue {min_eig:.3e}); Cholesky fallback required")]
    EmbeddingFallback { min_eig: f64 },
    #[error("scheme/driver mismatch: {0}")]
    SchemeMismatch(String),
    #[error("solution blew up at step {step} (|x| = {norm:.3e})")]
    BlowUp { step: usize, norm: f64 },
    #[error("empty window: [{0}, {1}]")]
    EmptyWindow(f64, f64),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("division by zero in {0}")]
    DivisionByZero(String),
}

pub type Result<T> = std::result::Result<T, Error>;
