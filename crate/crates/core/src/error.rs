use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The slow quadrature decay rate is not positive, so no bounded steady state exists.
    #[error("operating point is not stable (lambda_minus = {lambda_minus:e})")]
    NotStable { lambda_minus: f64 },

    #[error("Q function undefined: normalizability requires c > |d| (c = {c}, d = {d})")]
    QFunctionUndefined { c: f64, d: f64 },

    #[error(
        "Fock truncation too small: boundary population {boundary:e} at dim {dim}; try dim >= {suggested}"
    )]
    TruncationTooSmall {
        dim: usize,
        boundary: f64,
        suggested: usize,
    },

    #[error("step too large: trace drift {trace_err:e} after t = {t}")]
    StepTooLarge { trace_err: f64, t: f64 },

    #[error("integration accuracy not met: step-halving error estimate {estimate:e} at t = {t}")]
    Accuracy { estimate: f64, t: f64 },

    #[error("steady state not converged: residual {residual:e}")]
    NotConverged { residual: f64 },

    #[error("trajectory blowup: |alpha| = {magnitude:e} at step {step} (t = {t})")]
    Blowup { magnitude: f64, step: usize, t: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),
}
