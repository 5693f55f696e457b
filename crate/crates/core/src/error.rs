use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("singular evaluation: gradient and regularization both vanish")]
    SingularEvaluation,
    #[error("field does not belong to this grid")]
    GridMismatch,
    #[error("inner solve did not converge after {iterations} iterations (residual {residual:e})")]
    InnerSolve { iterations: usize, residual: f64 },
    #[error("solution norm {norm:e} exceeded cap {cap:e}")]
    Divergence { norm: f64, cap: f64 },
    #[error("no convergence within {iterations} iterations (residual {residual:e})")]
    Stagnation { iterations: usize, residual: f64 },
    #[error("eigen iteration did not converge: {0}")]
    EigenNonConvergence(String),
    #[error("bracketing failed: {0}")]
    Bracketing(String),
    #[error("test function is not positive at interior node {node}")]
    InvalidTestFunction { node: usize },
    #[error("shooting window: {0}")]
    ShootingWindow(String),
    #[error("integrator step size underflow at t = {t} (step {step:e})")]
    StepFloor { t: f64, step: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("internal: {0}")]
    Internal(String),
}
