use thiserror::Error;

use crate::market::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market specification:\n{0}")]
    InvalidMarket(ValidationReport),

    #[error("malformed market file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("feature dimension mismatch: segment {segment} has {found} coordinates, expected {expected}")]
    DimensionMismatch {
        segment: usize,
        expected: usize,
        found: usize,
    },

    #[error("length mismatch: expected {expected} entries, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("unsupported market shape: {0}")]
    UnsupportedShape(String),

    #[error("minimum distance is undefined for a single segment")]
    SingleSegment,

    /// Fair revenue is zero, so the ratio has no finite value.
    #[error("cost of fairness diverges (fair revenue is zero)")]
    DivergentCof,

    #[error("fair projection did not converge: worst residual {residual:e} after {passes} passes")]
    ProjectionDidNotConverge { residual: f64, passes: usize },

    #[error("oracle not applicable: {0}")]
    OracleInapplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
