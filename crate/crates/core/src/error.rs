use thiserror::Error;

/// Errors raised by the simulation modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("supercell too small: radius {radius} nm exceeds the supercell bound of {bound} nm")]
    SupercellTooSmall { radius: f64, bound: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("use tabulated contact hyperfine: |r| = {0} nm is inside the core exclusion radius")]
    CoreExclusion(f64),

    #[error("zero separation between coupled spins")]
    ZeroSeparation,

    #[error("incomplete DD period: pulse count {0} is odd")]
    IncompleteDdPeriod(u32),

    #[error("degenerate resonance denominator (2|omega_L| + A_par = {0})")]
    DegenerateResonance(f64),

    #[error("unsupported order {0}")]
    UnsupportedOrder(usize),

    #[error("insufficient decay: curve never falls below 1/e (minimum {0})")]
    InsufficientDecay(f64),

    #[error("time grids differ")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
