use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree {0} is not supported (expected 1..=3)")]
    UnsupportedDegree(usize),

    #[error("no quadrature rule of dimension {dim} and degree {degree}")]
    UnsupportedQuadrature { dim: usize, degree: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Cholesky factorization failed at block {block}: matrix is not positive definite")]
    FactorizationFailed { block: usize },

    #[error("eigensolver did not converge after {iterations} iterations ({converged} of {wanted} pairs)")]
    NotConverged {
        iterations: usize,
        converged: usize,
        wanted: usize,
    },

    #[error("expected {expected} rigid-body modes with |rho - 1| <= tol, found {found}")]
    RigidModeCount { expected: usize, found: usize },

    #[error("manufactured solution {case} is not available in {dim}D")]
    UnknownCase { case: String, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate estimate needs at least two points with positive error ({0})")]
    RateFit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
