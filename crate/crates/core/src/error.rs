use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are split by who can act on them: parameter and shape errors
/// are configuration mistakes, the numerical variants may be retried by the
/// Monte Carlo layer with a fresh random stream.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no companion matrix for neutral model")]
    NeutralModel,

    #[error("characteristic polynomial is degree-deficient (theta_p = 0)")]
    DegreeDeficient,

    #[error("eigenvalue solver did not converge on {dim}x{dim} companion matrix (theta = {theta:?})")]
    EigenNonConvergence { dim: usize, theta: Vec<f64> },

    #[error("trajectory overflow at t = {index} (|X_t| = {value:e})")]
    Overflow { index: usize, value: f64 },

    #[error("least-squares fit is singular (condition estimate {condition:e})")]
    SingularFit { condition: f64 },

    #[error("residuals lost precision: rounding floor {floor:e} exceeds tolerance")]
    PrecisionLoss { floor: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("degenerate asymptotic variance (tau^2 = {0})")]
    DegenerateVariance(f64),

    #[error("kernel is inapplicable: {0}")]
    InapplicableKernel(String),

    #[error("retry limit {limit} exhausted at replication {rep}: {last}")]
    RetriesExhausted {
        rep: usize,
        limit: usize,
        last: Box<Error>,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),
}

impl Error {
    /// Numerical failures that a fresh random stream may avoid.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. } | Error::SingularFit { .. } | Error::PrecisionLoss { .. }
        )
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Shape(_)
                | Error::NeutralModel
                | Error::DegreeDeficient
                | Error::InapplicableKernel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
