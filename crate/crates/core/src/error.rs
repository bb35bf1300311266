use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector where a nonzero one is required")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {0} is not an integer but the driver runs in discrete time")]
    NonIntegerTime(f64),

    #[error("driver has no inverse: {0}")]
    NoInverse(String),

    #[error("vector left the cone at time {time}: coordinate {index} = {value:e}")]
    LeftCone { time: f64, index: usize, value: f64 },

    #[error("matrix entry ({row}, {col}) = {value:e} violates the sign requirement")]
    SignViolation { row: usize, col: usize, value: f64 },

    #[error("step size underflow near t = {time} (piece [{piece_start}, {piece_end}])")]
    StepUnderflow { time: f64, piece_start: f64, piece_end: f64 },

    #[error("ill-conditioned projection: <w, w*> = {0:e}")]
    IllConditionedProjection(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
