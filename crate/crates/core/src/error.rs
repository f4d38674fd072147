use alloc::string::String;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} cells, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("fields live on different partitions")]
    PartitionMismatch,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid degree correlation: {0}")]
    InvalidCorrelation(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("no common refinement: {0}")]
    Refinement(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("spectrum truncated: {requested} modes requested, {available} available")]
    Truncation { requested: usize, available: usize },

    #[error("parameters are not supercritical (beta*lambda1 = {rate}, gamma = {gamma})")]
    Subcritical { rate: f64, gamma: f64 },

    #[error("state left the admissible domain at t = {t} (cell {cell}, value {value:e})")]
    DomainViolation { t: f64, cell: usize, value: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),

    #[error("level {level} is never reached within the trajectory (ends at t = {t_end})")]
    InsufficientHorizon { level: f64, t_end: f64 },

    #[error("level {level} is at or above the equilibrium value {ceiling}")]
    UnreachableLevel { level: f64, ceiling: f64 },

    #[error("first coefficient c1(0) vanishes; the crossing time is undefined")]
    ZeroLeadingCoefficient,

    #[error("bracket search failed: {0}")]
    Bracket(String),

    #[error("omega underflowed to {omega:e} at t = {t}")]
    OmegaUnderflow { t: f64, omega: f64 },

    #[error("prevalence {0} is at or above the saturation value")]
    Saturation(f64),

    #[error("unsupported kernel representation: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
