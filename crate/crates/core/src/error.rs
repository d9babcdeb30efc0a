use alloc::string::String;

use crate::lattice::Placement;

/// Everything the numerical core can reject or fail at.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("placement mismatch: expected {expected:?} field, got {found:?}")]
    PlacementMismatch { expected: Placement, found: Placement },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("source has nonzero mean {mean:e} (norm {norm:e}); periodic problem is incompatible")]
    IncompatibleSource { mean: f64, norm: f64 },

    #[error("{solver} did not converge in {iterations} iterations (best residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("requested {requested} modes but only {available} nonzero transverse modes exist")]
    TooManyModes { requested: usize, available: usize },

    #[error("operation requires a complete mode bank")]
    IncompleteBank,

    #[error("frequency {omega} outside the reliable band [{lo}, {hi}] of the mode bank")]
    OutOfBand { omega: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
