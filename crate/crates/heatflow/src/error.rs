use std::io;
use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),

    #[error("operation requires dimension {required}, got {got}")]
    DimensionUnsupported { required: usize, got: usize },

    #[error("grid spec mismatch")]
    SpecMismatch,

    #[error("grid size {0} exceeds the limit {1} for this operation")]
    GridTooLarge(usize, usize),

    #[error("points per dimension must be a power of two >= 16, got {0}")]
    BadGridSize(usize),

    #[error("mixed exponent regime")]
    MixedRegime,

    #[error("p infinite or negative: sum of 1/p_j must exceed n-1")]
    InfiniteP,

    #[error("need at least {required} exponents, got {got}")]
    TooFewExponents { required: usize, got: usize },

    #[error("weight relation rho1*alpha1 + rho2*alpha2 = 1 + 1/p violated by {0:.3e}")]
    WeightRelation(f64),

    #[error("parameter {name} = {value} outside its admissible range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("domain too small for support: need L >= {min_l:.3}, have {have_l}")]
    Wraparound { min_l: f64, have_l: f64 },

    #[error("atomic initial data cannot flow with sigma = 0; use a mixture")]
    AtomicSigmaZero,

    #[error("convolution output significantly negative ({0:.3e} relative); upstream bug")]
    NegativeConvolution(f64),

    #[error("field values must be nonnegative with positive mass")]
    FieldNotPositive,

    #[error("exponent must be an even integer >= 2, got {0}")]
    OddExponent(u32),

    #[error("geometric mean requires 1/p1 + 1/p2 = 1, got {0}")]
    ConjugateExponents(f64),

    #[error("weighted monotonicity is stated for p >= 1 only")]
    ReverseWeighted,

    #[error("log-convexity hypothesis fails on an input flow (margin {0:.3e})")]
    HypothesisViolated(f64),

    #[error("centered difference needs an interior index, got {0} of {1}")]
    BoundaryIndex(usize, usize),

    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
