use thiserror::Error;

/// Everything that can go wrong while solving, verifying or simulating.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),

    /// `N·ρ·(1+θ) ≥ 1`: the cooperative payoff is infinite.
    #[error("N·ρ·(1+θ) = {value} ≥ 1 for team size {team}: cooperative payoff is infinite")]
    AssumptionViolated { team: f64, value: f64 },

    #[error("residual has no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("root finder exceeded {0} iterations")]
    MaxIterations(usize),

    #[error("ODE step size underflow at a = {0}")]
    StepUnderflow(f64),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("point a = {0} is a segment breakpoint; use one-sided evaluation")]
    AtBreakpoint(f64),

    #[error("invalid partition: {0}")]
    PartitionInvalid(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
