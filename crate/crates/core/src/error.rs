use thiserror::Error;

/// Errors raised by the simulator and its diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TcmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    ShapeMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid derivative order {0}: must satisfy 0 < |alpha| <= 3")]
    InvalidOrder(u32),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("cone is not resolved by the grid: {0}")]
    UnresolvedCone(String),

    #[error("epsilon = {0} must lie in (0, 1/e) for the log-log amplitude")]
    EpsilonTooLarge(f64),

    #[error("initial perturbation w0 is not divergence-free (relative divergence {0:e})")]
    NotDivergenceFree(f64),

    #[error("time mismatch: state at t = {state}, linear flow at t = {flow}")]
    TimeMismatch { state: f64, flow: f64 },

    #[error("need at least {needed} diagnostic rows, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = TcmError> = std::result::Result<T, E>;
