use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The iterative solver stopped without meeting its tolerance. The best
    /// iterate seen is carried along so callers can inspect or reuse it.
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("coefficient violation: {0}")]
    Coefficient(String),

    #[error("singular local system on element {element}")]
    ElementSingular { element: usize },

    #[error("no observations cover time {time}")]
    ObservationGap { time: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
