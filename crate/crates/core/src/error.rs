use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("derivative order exceeds H^({max}) in the symbol alphabet")]
    OrderExceeded { max: usize },
    #[error("series is not invertible: {0}")]
    NotInvertible(String),
    #[error("log1p/exp argument has a term of non-positive weight at z0^{p} Z^{q}")]
    NonPositiveWeight { p: i32, q: i32 },
    #[error("operation requires a finite truncation weight")]
    InfinitePrecision,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScaleFactor(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mollifier width parameter must be positive and finite, got {0}")]
    BadMollifier(f64),
    #[error("non-convergent tail at k_max = {k_max}: estimate {tail:e} exceeds budget {budget:e}")]
    NonConvergentTail { k_max: f64, tail: f64, budget: f64 },
    #[error("mode state violates G_pp > 0 at k = {k}")]
    NonPositiveMode { k: f64 },
    #[error("implicit system degenerate: affine coefficient {coeff:e} below threshold, fixed point did not converge in {iterations} iterations")]
    Degenerate { coeff: f64, iterations: usize },
    #[error("initial state not self-consistent after {iterations} iterations, last update {update:e}")]
    InitNotConverged { update: f64, iterations: usize },
    #[error("step-size underflow at t = {t}: dt = {dt:e}")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("step limit of {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: u64 },
    #[error("non-finite value encountered at t = {t}: {what}")]
    NonFinite { t: f64, what: String },
    #[error("momentum must be positive, got {0}")]
    NonPositiveMomentum(f64),
    #[error("singular coefficient of the third Hubble derivative in the trace equation: {0:e}")]
    SingularCoefficient(f64),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
