use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: achieved error {achieved:.3e} (target {target:.3e})")]
    Quadrature { achieved: f64, target: f64 },
    #[error("circulant embedding has negative eigenvalue {min_eigenvalue:.3e} and the fallback failed")]
    Embedding { min_eigenvalue: f64 },
    #[error("cost guard: {0}")]
    CostGuard(String),
    #[error("regime violation: {0}")]
    Regime(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("solver blow-up at t = {t}: |x| = {norm:.3e}")]
    BlowUp { t: f64, norm: f64 },
    #[error("step too coarse: {0}")]
    StepTooCoarse(String),
    #[error("assumption check failed: {0}")]
    Assumption(String),
    #[error("not positive semidefinite: smallest eigenvalue {0:.3e}")]
    NotPsd(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
