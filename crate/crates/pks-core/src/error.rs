use thiserror::Error;

/// Errors surfaced by the solver and its diagnostics.
#[derive(Debug, Error)]
pub enum PksError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("kernel under-resolved: epsilon {epsilon} < grid spacing {spacing}")]
    KernelUnderResolved { epsilon: f64, spacing: f64 },

    #[error("kernel epsilon {epsilon} too large for half-width {half_width} (need epsilon < L/4)")]
    KernelTooWide { epsilon: f64, half_width: f64 },

    #[error("kernel bound '{bound}' violated at radius {radius:e}: slack {slack:e}")]
    KernelBoundViolated {
        bound: &'static str,
        radius: f64,
        slack: f64,
    },

    #[error("empty upper half plane")]
    EmptyUpperHalfPlane,

    #[error("positivity broken at step {step}: min value {min:e} (allowed {floor:e})")]
    PositivityBroken { step: u64, min: f64, floor: f64 },

    #[error("time step underflow at step {step} after {halvings} CFL halvings")]
    TimeStepUnderflow { step: u64, halvings: u32 },

    #[error("record spacing non-uniform at index {index}: dt {found:e} vs {expected:e}")]
    NonUniformSpacing {
        index: usize,
        found: f64,
        expected: f64,
    },

    #[error("initial configuration rejected: {0}")]
    HypothesisViolated(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PksError>;
