use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("word length {requested} exceeds the configured cap {cap}")]
    LengthCapExceeded { requested: u128, cap: u64 },

    #[error("no return word found for any power l <= {ell_max}; raise ell_max")]
    NoReturnWordFound { ell_max: u32 },

    #[error("characteristic polynomial degree {degree} > 8: exact irreducibility test refused")]
    DegreeTooLarge { degree: usize },

    #[error("eigenvalue separation {separation:.3e} is below 10*tol; roots treated as repeated")]
    RepeatedRoots { separation: f64 },

    #[error("Vandermonde matrix condition number {cond:.3e} exceeds 1e12")]
    SingularVandermonde { cond: f64 },

    #[error("dual pairing <l(v), e*_{j}> has modulus {value:.3e}, below tolerance")]
    DegenerateDual { j: usize, value: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("orbit prefix too short: need tiling length {needed}, have {available}")]
    PrefixTooShort { needed: f64, available: f64 },

    #[error("non-positive value at point {index} of a power-law fit input")]
    NonPositiveValue { index: usize },

    #[error("no decay: fitted exponent gamma = {gamma:.4} <= 0")]
    NoDecay { gamma: f64 },

    #[error("trace value |x_n| = {value:.3e} exceeds 1e15: precision exhausted, reduce N")]
    Overflow { value: f64 },

    #[error("omega = {omega} outside [1/B, B] with B = {b}")]
    OmegaOutOfRange { omega: f64, b: f64 },

    #[error("correlation grid step {dt} too coarse: need step <= {required}")]
    GridTooCoarse { dt: f64, required: f64 },

    #[error("step function has mean {mean:.3e} against the letter frequencies; expected zero")]
    MeanNotZero { mean: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
