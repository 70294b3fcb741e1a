use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} samples, grid expects {expected}")]
    SampleCount { expected: usize, got: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("invalid Lebesgue exponent {0} (need p >= 1 or p = inf)")]
    InvalidExponent(f64),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("kernel at t = {t} is not resolved: spectral tail {tail:e}, boundary ratio {wrap:e}")]
    UnresolvedKernel { t: f64, tail: f64, wrap: f64 },
    #[error("current denominator {value:e} below 1e-8 at sample {index}")]
    DenominatorUnderflow { index: usize, value: f64 },
    #[error("current evaluation produced a non-finite value at sample {index}")]
    NonFiniteCurrent { index: usize },
    #[error("Picard iteration did not converge in {iterations} iterations at t = {time} (last contraction ratio {last_ratio})")]
    StepTooLarge { time: f64, iterations: usize, last_ratio: f64 },
    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("non-finite iterate u^{index}")]
    NonFiniteIterate { index: usize },
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-positive value {value} at t = {t} in fit window")]
    NonPositiveSample { t: f64, value: f64 },
    #[error("q = {q} outside the admissible window ({lo}, {hi})")]
    OutsideWindow { q: f64, lo: f64, hi: f64 },
    #[error("track `{0}` not present in norm series")]
    MissingTrack(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
