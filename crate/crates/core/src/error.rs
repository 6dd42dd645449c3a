use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("kernel argument must be a non-negative number, got {0}")]
    NegativeDistance(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("points {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} requires nested site hierarchies")]
    NotNested(&'static str),

    #[error("level {level} out of range 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("level set is not strictly increasing")]
    Unordered,

    #[error("missing sample on level {level}, index {index}")]
    MissingLevelSample { level: usize, index: usize },

    #[error("{} sparse grid points have no sample (first: {:?})", .missing.len(), &.missing[..(.missing.len().min(8))])]
    MissingSamples { missing: Vec<usize> },

    #[error("naive evaluation needs about {estimate:.3e} terms, above the bound {bound:.3e}; use the precomputed or nodal representation")]
    CostGuard { estimate: f64, bound: f64 },

    #[error("linear solve failed on level {level}: {reason} (min pivot {min_pivot:.3e}, residual {residual:.3e})")]
    Numerical {
        level: usize,
        reason: &'static str,
        min_pivot: f64,
        residual: f64,
    },
}
