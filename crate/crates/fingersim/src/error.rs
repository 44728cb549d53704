use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{context}: linear solver did not converge within {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("CFL violation: advective CFL {cfl:.4} exceeds 1 for dt = {dt:.6e}")]
    CflViolation { cfl: f64, dt: f64 },

    #[error("time step {dt:.6e} too large for reaction rate {kappa:.6e}")]
    ReactionStepTooLarge { dt: f64, kappa: f64 },

    #[error("non-positive value {value:.6e} where a strictly positive field is required")]
    NonPositiveField { value: f64 },

    #[error("grid mismatch: expected {expected_nx}x{expected_ny}, got {got_nx}x{got_ny}")]
    GridMismatch {
        expected_nx: usize,
        expected_ny: usize,
        got_nx: usize,
        got_ny: usize,
    },

    #[error("invariant violated at step {step} (t = {t:.6}): {what}")]
    InvariantViolation { step: usize, t: f64, what: String },

    #[error("decay fit: {0}")]
    DecayFit(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot format error in {path}: {what}")]
    SnapshotFormat { path: String, what: String },
}

impl SimError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
