use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The trajectory left the admissible region before the requested time.
    #[error("trajectory diverged at t = {t:.6e} (|x| = {norm:.3e})")]
    Divergence { t: f64, norm: f64 },

    #[error("step size underflow at t = {t:.6e} (h = {step:.3e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:.6e}")]
    TooManySteps { t: f64, max_steps: usize },

    /// S'(h) does not have full column rank.
    #[error("family derivative is rank deficient at h = {h:?} (singular values {singular_values:?})")]
    RankDeficient {
        h: Vec<f64>,
        singular_values: Vec<f64>,
    },

    /// The complement operator Bᵀ(P'₀ − I)B is not invertible.
    #[error("complement operator is singular at h = {h:?} (singular values {singular_values:?})")]
    ComplementSingular {
        h: Vec<f64>,
        singular_values: Vec<f64>,
    },

    #[error("complement fixed-point iteration did not converge in {iterations} iterations at h = {h:?}, eps = {eps:e} (last step {last_step:.3e}); eps is likely outside the contraction regime")]
    BetaNonConvergence {
        h: Vec<f64>,
        eps: f64,
        iterations: usize,
        last_step: f64,
    },

    #[error("zero is degenerate (|det J| = {det:.3e}); use the boundary degree")]
    DegenerateJacobian { det: f64 },

    #[error("map vanishes on the boundary (|f| = {norm:.3e} at {point:?})")]
    BoundaryZero { norm: f64, point: Vec<f64> },

    #[error("zero at {h:?} is not isolated: {reason}")]
    NotIsolated { h: Vec<f64>, reason: String },

    #[error("degree of a degenerate zero in dimension {k} is not supported")]
    UnsupportedDimension { k: usize },

    #[error("unknown model '{name}'; available models: {}", available.join(", "))]
    UnknownModel {
        name: String,
        available: Vec<String>,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
