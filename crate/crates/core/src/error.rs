use thiserror::Error;

use crate::transform::GFunction;

/// Errors raised by grids, transforms, models, steppers and the run harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("field has {got} samples, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("field mean {mean:e} is not negligible (sup norm {sup:e})")]
    NonZeroMean { mean: f64, sup: f64 },

    #[error("operator symbol is not positive at mode ({kx}, {ky}): {value:e}")]
    SingularMode { kx: usize, ky: usize, value: f64 },

    #[error("{g} is undefined at x = {x:e}")]
    DomainError { g: GFunction, x: f64 },

    #[error("{g}: inverse undefined at r = {r:e} ({bound})")]
    RangeError { g: GFunction, r: f64, bound: &'static str },

    #[error("{g}: inverse derivative singular at r = {r:e}")]
    SingularDerivative { g: GFunction, r: f64 },

    #[error("potential evaluated outside its domain at sample {index} (value {value:e})")]
    OutOfDomain { index: usize, value: f64 },

    #[error("Newton iteration failed after {iters} iterations (best x = {best_x:e}, residual = {best_residual:e})")]
    NewtonDiverged {
        iters: usize,
        best_x: f64,
        best_residual: f64,
    },

    #[error("singular Jacobian in coupled Newton solve")]
    JacobianSingular,

    #[error("auxiliary denominator G(∫F) = {0:e} is too close to zero")]
    DenominatorNearZero(f64),

    #[error("energy form needs a previous time level")]
    MissingHistory,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("adaptive stepping stalled at dt_min = {dt_min:e} (indicator {indicator:e})")]
    StallError { dt_min: f64, indicator: f64 },

    #[error("unsupported model for this operation: {0}")]
    UnsupportedModel(String),

    #[error("invalid scheme state: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("step {step} failed: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
