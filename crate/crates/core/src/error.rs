//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by field construction, estimation, and segmentation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field dimensions {height}x{width}: {reason}")]
    InvalidDimensions {
        height: usize,
        width: usize,
        reason: &'static str,
    },

    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("model order is invalid: {0}")]
    InvalidOrder(String),

    #[error("parameter set does not match the model order: {0}")]
    DimensionMismatch(String),

    #[error("invalid synthesis configuration: {0}")]
    InvalidConfig(String),

    #[error("unstable parameters: recursion output exceeded the overflow guard")]
    UnstableParameters,

    #[error("lag bounds ({kmax},{lmax}) exceed field size ({n1},{n2})")]
    LagBounds {
        kmax: usize,
        lmax: usize,
        n1: usize,
        n2: usize,
    },

    #[error("lag grid covers ({have_k},{have_l}) but ({need_k},{need_l}) is required")]
    InsufficientLagCoverage {
        have_k: usize,
        have_l: usize,
        need_k: usize,
        need_l: usize,
    },

    #[error("estimation failure: linear system is singular even after ridge regularization")]
    SingularSystem,

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("field of size {n1}x{n2} is too small for the requested margins ({need1},{need2})")]
    FieldTooSmall {
        n1: usize,
        n2: usize,
        need1: usize,
        need2: usize,
    },

    #[error("block size {block_size} is incompatible with the order margins: {reason}")]
    BlockTooSmall { block_size: usize, reason: String },

    #[error("{found} valid blocks but {needed} clusters requested")]
    TooFewValidBlocks { found: usize, needed: usize },

    #[error("label grids have mismatched shapes: {0} vs {1}")]
    LabelShapeMismatch(usize, usize),

    #[error("missing fit for valid block ({row},{col})")]
    MissingBlockFit { row: usize, col: usize },

    #[error("PGM format error: {0}")]
    PgmFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
