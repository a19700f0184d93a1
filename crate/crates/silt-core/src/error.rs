use thiserror::Error;

use crate::walk::MAX_DIM;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum SiltError {
    #[error("dimension {0} out of range (supported 1..={MAX_DIM})")]
    DimensionOutOfRange(usize),

    /// An allocation was refused instead of swapping. `required` is in bytes.
    #[error("required {required} bytes exceeds the memory budget of {budget} bytes")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("trajectory has {0} steps; the strand decomposition needs a power of two")]
    NotDyadic(usize),

    #[error("strand has odd step count {0} and cannot be split at a midpoint")]
    OddStrand(usize),

    #[error("exact enumeration of {0} paths exceeds the enumeration cap")]
    EnumerationTooLarge(u128),

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate regression input: {0}")]
    DegenerateFit(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("table format: {0}")]
    TableFormat(String),
}

pub type Result<T> = std::result::Result<T, SiltError>;
