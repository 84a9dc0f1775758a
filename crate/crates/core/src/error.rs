use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (supported: 2, 3)")]
    UnsupportedDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("quadrature budget exhausted: estimate {estimate:.6e} with error {error:.2e} after {evals} evaluations")]
    QuadratureBudget { estimate: f64, error: f64, evals: usize },
    #[error("integrand returned a non-finite value at {0:.6e}")]
    NonFiniteIntegrand(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, VerifyError>;
