use thiserror::Error;

/// Errors raised by the simulation, solver and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite state or force at t = {time}")]
    NumericalBlowup { time: f64 },

    #[error("operation requires a 1-D model, got dimension {0}")]
    UnsupportedDimension(usize),

    #[error("trajectory exceeded the step budget of {max_steps} steps")]
    StepBudgetExhausted { max_steps: u64, last_state: [f64; 2], steps: u64 },

    #[error("AMS exceeded the iteration budget of {0} iterations")]
    IterationBudgetExhausted(u64),

    #[error("point ({x}, {y}) lies outside the committor grid")]
    OutOfDomain { x: f64, y: f64 },

    #[error("sampling density on C has no mass (normalisation underflow)")]
    DegenerateDensity,

    #[error("adaptive quadrature did not converge (estimated error {0:e})")]
    QuadratureFailure(f64),

    #[error("x_s = {0} is not a local maximum of the potential")]
    NotASaddle(f64),

    #[error("committor solver did not reach the residual target: {residual:e} > {tol:e}")]
    SolverDiverged { residual: f64, tol: f64 },

    #[error("sample is degenerate: {0}")]
    DegenerateSample(&'static str),

    #[error("reference value {0} is outside (0, 1)")]
    InvalidReference(f64),

    #[error("A + B - C vanishes; spectrum is degenerate")]
    DegenerateSpectrum,

    #[error("Newton iteration failed to converge")]
    SolverFailed,

    #[error("convergence sweep needs at least {needed} points, got {got}")]
    InsufficientSweep { needed: usize, got: usize },

    #[error("branch level {level} not attained on survivor despite its maximum {q_max}")]
    InternalInconsistency { level: f64, q_max: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed committor grid file: {0}")]
    GridFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
