use thiserror::Error;

/// Errors raised by model construction, analysis and integration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("Poisson ratio {0} makes nu/(1-2nu) singular or out of range (-1, 1/2)")]
    SingularPoissonRatio(f64),

    #[error("nullcline F=0 is undefined for mu = 0")]
    NullclineUndefined,

    #[error("nullcline F=0 has no positive maximum (1 - b - K = {0} <= 0)")]
    NoPositiveMaximum(f64),

    #[error("state is not an equilibrium (residual {0:e})")]
    ResidualTooLarge(f64),

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("step budget of {0} steps exhausted")]
    MaxSteps(usize),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("initial state has {got} components, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("h = {h} lies outside the stable slow-manifold branch (break at h = {h_break})")]
    OutsideBranchDomain { h: f64, h_break: f64 },

    #[error("state is off the stable sheet (F1 residual {0:e})")]
    OffSheet(f64),

    #[error("no turning in the transition layer: {0}")]
    NoTurning(&'static str),

    #[error("parameters are not in an oscillatory regime: {0}")]
    NotOscillatory(String),

    #[error("grid must be strictly monotone")]
    NonMonotoneGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
