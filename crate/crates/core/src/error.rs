use thiserror::Error;

/// Errors raised by the solver kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("state is off the constraint manifold: |R - r| = {residual:e}")]
    ConstraintViolation { residual: f64 },

    #[error("players are within capture geometry: R = {separation}, r = {radius}")]
    CaptureGeometry { separation: f64, radius: f64 },

    #[error("oval parameter {phi_bar} outside support [-{support}, {support}]")]
    OutOfSupport { phi_bar: f64, support: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integration did not reach a terminal surface within {steps} steps")]
    NonTermination { steps: usize },

    #[error("value {value} is outside the attainable range")]
    NoTrajectory { value: f64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("strategy failure: {0}")]
    Strategy(String),
}

pub type Result<T> = std::result::Result<T, GameError>;
