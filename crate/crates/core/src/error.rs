use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("drive is degenerate with the cavity: |omega_d - omega_c + i kappa/2| = 0")]
    DegenerateDrive,

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("ring of {n_sites} sites exceeds the dense-matrix size guard of {limit}")]
    TooManySites { n_sites: usize, limit: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("perturbation theory invalid: {0}")]
    PerturbationInvalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("steady state is degenerate (null-space dimension {dimension})")]
    DegenerateSteadyState { dimension: usize },

    #[error("rate graph is singular: {0}")]
    SingularRateGraph(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("step size too large: dt * max_rate = {product:.3e} (limit 0.1)")]
    StepSizeTooLarge { product: f64 },

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("sweep axes differ: {0}")]
    AxisMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
