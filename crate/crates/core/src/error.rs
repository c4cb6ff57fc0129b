use thiserror::Error;

/// Errors raised by the estimators, risk evaluators and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Cholesky factorization failed: {0} is not symmetric positive definite")]
    CholeskyFailure(String),

    #[error("degrees of freedom {df} too small for dimension {dim}")]
    DegreesOfFreedom { df: f64, dim: usize },

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("estimator not defined for this case: {0}")]
    Case(String),

    #[error("condition not applicable: {0}")]
    NotApplicable(String),

    #[error("tied eigenvalues f[{i}] and f[{j}] in a divided difference of a non-separable shrinkage function")]
    Tie { i: usize, j: usize },

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid experiment configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to CLI exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CholeskyFailure(_) | Error::Rank(_) | Error::Tie { .. } | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
