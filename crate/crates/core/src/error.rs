use thiserror::Error;

/// Errors raised by the model, solvers, calibration and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariance matrix is not positive definite (Cholesky pivot {pivot} failed)")]
    NotPositiveDefinite { pivot: usize },
    #[error("covariance matrix is not symmetric (max |Σij - Σji| = {max_asymmetry:e})")]
    AsymmetricCovariance { max_asymmetry: f64 },
    #[error("covariance diagonal entry {index} is not strictly positive")]
    NonPositiveDiagonal { index: usize },
    #[error("risk aversion must be positive and finite, got {0}")]
    NonPositiveGamma(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("at least two assets are required, got {0}")]
    TooFewAssets(usize),
    #[error("correlation {rho} outside ({lower}, 1) for n = {n}")]
    RhoOutOfRange { rho: f64, lower: f64, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("theta = {theta} is outside the admissible domain (limit {limit})")]
    ThetaOutOfDomain { theta: f64, limit: f64 },
    #[error("theta must be non-zero for this quantity")]
    ThetaZero,
    #[error("1 - θγS = {0} is not positive")]
    DomainViolation(f64),
    #[error("fixed-point bracket [{lower}, {upper}] does not straddle a root")]
    NoBracket { lower: f64, upper: f64 },
    #[error("tolerance not reached after {iterations} iterations (residual {residual:e})")]
    ToleranceNotReached { iterations: usize, residual: f64 },
    #[error("negative discriminant {0:e} in the fixed-mean effective risk aversion")]
    NegativeDiscriminant(f64),
    #[error("eta = {eta} is unreachable; largest attainable entropy is {max_entropy}")]
    EtaUnreachable { eta: f64, max_entropy: f64 },
    #[error("perturbed model (k = {k}, rho = {rho}) is not positive definite")]
    PerturbedModelInvalid { k: f64, rho: f64 },
    #[error("maximum iterations {iterations} reached (projected gradient norm {grad_norm:e})")]
    MaxIterations { iterations: usize, grad_norm: f64 },
    #[error("importance weights degenerate (largest normalised weight {max_share}; {reason})")]
    DegenerateWeights { max_share: f64, reason: &'static str },
}

impl Error {
    /// True for errors caused by θ (or η) lying outside the region where the
    /// robust problem is defined, as opposed to malformed inputs.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::ThetaOutOfDomain { .. }
                | Error::ThetaZero
                | Error::DomainViolation(_)
                | Error::NoBracket { .. }
                | Error::ToleranceNotReached { .. }
                | Error::NegativeDiscriminant(_)
                | Error::EtaUnreachable { .. }
                | Error::PerturbedModelInvalid { .. }
                | Error::MaxIterations { .. }
                | Error::DegenerateWeights { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
