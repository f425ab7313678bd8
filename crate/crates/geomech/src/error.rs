//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by algebraic and geometric operations.
#[derive(Debug, Error)]
pub enum GeomechError {
    #[error("matrix is not antisymmetric (defect {defect:.3e}, tolerance 1e-10)")]
    NotAntisymmetric { defect: f64 },

    #[error("dimension mismatch: expected {expected}, got {got} for {what}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("sample grids are incompatible: {0}")]
    GridMismatch(String),

    #[error("singular momentum value: {0}")]
    SingularMomentum(String),

    #[error("trajectory is not planar (out-of-plane fraction {0:.3e})")]
    NotPlanar(f64),

    #[error("orbit is not elliptic (energy {energy:.6e} >= 0): {what} undefined")]
    NotElliptic { energy: f64, what: &'static str },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

/// Errors raised while advancing a trajectory in time.
#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },

    #[error("{solver} failed to converge within {iterations} iterations at t = {time}")]
    SolverDiverged {
        solver: &'static str,
        iterations: usize,
        time: f64,
    },

    #[error("initial state violates constraint (residual {residual:.3e} > {tolerance:.3e})")]
    ConstraintViolated { residual: f64, tolerance: f64 },

    #[error("integrator configuration invalid: {0}")]
    BadConfig(String),

    #[error("method {method} is not applicable to this system: {reason}")]
    MethodMismatch { method: &'static str, reason: String },
}
