use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("group orders differ: {0} vs {1}")]
    OrderMismatch(u32, u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} overflows the supported integer range")]
    Overflow(&'static str),

    #[error("walk parameters unavailable: {0}")]
    MissingRatioLimit(String),

    #[error("kappa = {kappa} outside [1, {upper})")]
    KappaOutOfRange { kappa: f64, upper: f64 },

    #[error("operation requires a step-ratio limit a < 1")]
    CriticalRegime,

    #[error("shell sum did not reach tolerance {tol:e} before radius {radius}")]
    ShellTruncation { tol: f64, radius: u64 },

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("M^i / g_kappa(a^-i) is not increasing at i = {index}")]
    MonotonicityViolation { index: i64 },
}

pub type Result<T> = std::result::Result<T, Error>;
