//! Crate-wide error type.

use dfrc_conic::SolveStatus;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not PSD (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error(transparent)]
    Conic(#[from] dfrc_conic::ProblemError),
    #[error("solver failed with status {status:?} after {iterations} iterations")]
    SolverFailure {
        status: SolveStatus,
        iterations: usize,
    },
    #[error("rank-one extraction degenerate for user {user} (received power {power:.3e})")]
    DegenerateExtraction { user: usize, power: f64 },
    #[error("residual covariance not PSD (min eigenvalue {min_eig:.3e}); relaxation tightness violated")]
    TightnessViolation { min_eig: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("user {user} has no allocated power; target matrix is rank deficient")]
    DegenerateUser { user: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
