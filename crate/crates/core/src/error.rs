use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised anywhere in the surrogate pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time {t} outside control span [{t0}, {t_end}]")]
    TimeOutOfRange { t: f64, t0: f64, t_end: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {max_steps} steps before t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("non-finite state derivative at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("snapshot {index} failed: {source}")]
    Snapshot { index: usize, source: Box<Error> },

    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),

    #[error("every singular value is zero")]
    AllZeroSpectrum,

    #[error("negative radius {0}")]
    NegativeRadius(f64),

    #[error("duplicate RBF centers {first} and {second}")]
    DuplicateCenters { first: usize, second: usize },

    #[error("Gram matrix is singular")]
    SingularGram,

    #[error("RBF solve residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
