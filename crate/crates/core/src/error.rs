use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("aperture violation: {0}")]
    Aperture(String),
    #[error("invalid construction: {0}")]
    Construction(String),
    #[error("truncation tail {tail:e} exceeds budget {budget:e}")]
    Truncation { tail: f64, budget: f64 },
    #[error("weights are not summable: {0}")]
    NotSummable(String),
    #[error("pairing undefined: distance {distance} is not below xi = {xi}")]
    PairingUndefined { distance: f64, xi: f64 },
    #[error("orbit left the domain at step {step}")]
    Orbit { step: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no convergence after {iterations} iterations (last residual {last:e})")]
    Convergence {
        iterations: usize,
        last: f64,
        trace: Vec<f64>,
    },
    #[error("derivative estimates disagree: cauchy {cauchy}, finite difference {finite_difference}")]
    DerivativeMismatch {
        order: usize,
        cauchy: f64,
        finite_difference: f64,
    },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
