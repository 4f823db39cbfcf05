use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cone violation: entry {index} is {value}")]
    ConeViolation { index: usize, value: f64 },

    #[error("shape mismatch: {left:?} vs {right:?} (sizes, cells)")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("no default envelopes for {0} kernels; supply them explicitly")]
    NoDefault(&'static str),

    #[error("iterate order broken at node {node}: excess {excess:e}")]
    InternalOrder { node: usize, excess: f64 },

    #[error("no convergence after {iterations} sweeps (last increment {last:e})")]
    MaxItersExceeded {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("non-finite state at node {node}")]
    NonfiniteState { node: usize },

    #[error("oracle clamped {clamped:e} of mass, budget is {budget:e}")]
    ClampBudgetExceeded { clamped: f64, budget: f64 },

    #[error("transport advances {shift} cells per step; must be an integer")]
    IncompatibleGrid { shift: f64 },

    #[error(
        "time step too large: h*a*lambda_max = {0} exceeds 2, the propagator would leave the cone"
    )]
    StepTooLarge(f64),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Stable upper-case identifier, shared with the C ABI and CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ConeViolation { .. } => "CONE_VIOLATION",
            Error::ShapeMismatch { .. } => "SHAPE_MISMATCH",
            Error::Domain(_) => "DOMAIN_ERROR",
            Error::AssumptionViolation(_) => "ASSUMPTION_VIOLATION",
            Error::NoDefault(_) => "NO_DEFAULT",
            Error::InternalOrder { .. } => "INTERNAL_ORDER_ERROR",
            Error::MaxItersExceeded { .. } => "MAX_ITERS_EXCEEDED",
            Error::NonfiniteState { .. } => "NONFINITE_STATE",
            Error::ClampBudgetExceeded { .. } => "CLAMP_BUDGET_EXCEEDED",
            Error::IncompatibleGrid { .. } => "INCOMPATIBLE_GRID",
            Error::StepTooLarge(_) => "STEP_TOO_LARGE",
            Error::InvalidKernel(_) => "INVALID_KERNEL",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::GridMismatch(_) => "GRID_MISMATCH",
            Error::Io { .. } => "IO_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
