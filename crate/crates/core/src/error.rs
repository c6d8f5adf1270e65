use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is numerically singular: {0}")]
    Singular(&'static str),

    #[error("Gram matrix of the invariant form is singular; the basis is broken")]
    SingularGram,

    #[error("ambiguous numerical kernel: singular-value gap ratio {ratio:.3e} is below {required:.1e}")]
    AmbiguousKernel { ratio: f64, required: f64 },

    #[error("element is not regular (centralizer dimension {centralizer_dim}, rank {rank})")]
    NotRegular { centralizer_dim: usize, rank: usize },

    #[error("element is not regular semisimple: {0}")]
    NotRegularSemisimple(String),

    #[error("eigenvalues collide within {tolerance:.1e}; refusing to match eigenvectors")]
    EigenvalueCollision { tolerance: f64 },

    #[error("Kostant section solver did not converge after {restarts} restarts (best residual {best_residual:.3e})")]
    NoConvergence { best_residual: f64, restarts: usize },

    #[error("ill-conditioned {what}: condition number {cond:.3e} exceeds {limit:.1e}")]
    IllConditioned { what: &'static str, cond: f64, limit: f64 },

    #[error("local error estimate {estimate:.3e} exceeds {limit:.1e} at t = {time:.6}")]
    StepRejected { estimate: f64, limit: f64, time: f64 },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
