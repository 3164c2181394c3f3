use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("quadrature for kernel `{kernel}` did not converge (depth {depth}, last estimate {estimate})")]
    Quadrature {
        kernel: String,
        depth: usize,
        estimate: f64,
    },

    #[error("grid step {h} does not resolve the kernel; need h <= {required}")]
    Resolution { h: f64, required: f64 },

    #[error("Picard iteration failed to contract after {iterations} iterations (observed ratio {ratio:.6})")]
    Contraction { iterations: usize, ratio: f64 },

    #[error("inconsistent eigenpair: relative Wronskian deviation {deviation:.3e}")]
    InconsistentEigenpair { deviation: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },

    #[error("dense exponential is limited to {limit} nodes, got {nodes}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("decay fit rejected: {0}")]
    FitRejected(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("local-time window {delta} is below 5*sqrt(dt) = {minimum}")]
    EstimatorBias { delta: f64, minimum: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::Parameter {
        name,
        reason: reason.into(),
    }
}
