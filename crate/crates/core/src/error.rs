//! Crate-wide error type.

use crate::tensor::Dims;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor dimensions must be positive, got {0:?}")]
    ZeroDim(Dims),
    #[error("flat data length {len} does not match dims {dims:?}")]
    DataLength { dims: Dims, len: usize },
    #[error("tensor dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch { left: Dims, right: Dims },
    #[error("division by zero entry at flat index {index}")]
    DivisionByZero { index: usize },
    #[error("logarithm of nonpositive entry {value} at flat index {index}")]
    LogDomain { index: usize, value: f64 },
    #[error("{what} violates the entropy domain at flat index {index} (value {value})")]
    EntropyDomain {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("indicator tensor {tensor} has non-binary entry {value} at flat index {index}")]
    NonBinaryIndicator {
        tensor: usize,
        index: usize,
        value: f64,
    },
    #[error("indicator supports overlap at flat index {index} (rows {first} and {second})")]
    OverlappingIndicators {
        index: usize,
        first: usize,
        second: usize,
    },
    #[error("constraint row {row} has empty support")]
    EmptyRow { row: usize },
    #[error("vector length {len} does not match block row count {rows}")]
    LengthMismatch { len: usize, rows: usize },
    #[error(
        "right-hand side entry {value} in block {block}, row {row} is not strictly positive; \
         drop empty lines when generating projection data"
    )]
    NonpositiveRhs { block: usize, row: usize, value: f64 },
    #[error("upper bound entry {value} at flat index {index} is not strictly positive")]
    NonpositiveUpper { index: usize, value: f64 },
    #[error("invalid projection direction ({0}, {1}); expected (1,p), (1,-p), (p,1) or (p,-1)")]
    InvalidDirection(i64, i64),
    #[error("duplicate projection direction ({0}, {1})")]
    DuplicateDirection(i64, i64),
    #[error("dual update underflowed to zero in block {block}; use the log-domain scheme")]
    DualUnderflow { block: usize },
    #[error("nonfinite value encountered in {context}")]
    NonFinite { context: &'static str },
    #[error("capacity multiplier has a positive entry at flat index {index} (outside the dual domain)")]
    PositiveCapacityMultiplier { index: usize },
    #[error("inner iteration cap {cap} exceeded before the inexactness gate was met")]
    InnerCapExceeded { cap: usize },
    #[error(
        "marginal totals of the right-hand sides disagree: block {block} sums to {got}, \
         block 0 sums to {want}"
    )]
    InconsistentMarginals { block: usize, got: f64, want: f64 },
    #[error("a relative interior point is required for the capacity pullback")]
    MissingInteriorPoint,
    #[error("interior point is not strictly inside the box at flat index {index}")]
    NotStrictlyInterior { index: usize },
    #[error("operation requires marginal-structured constraint blocks")]
    NotMarginalStructured,
    #[error("linear program exceeds the oracle size guard ({vars} > {max} variables)")]
    OracleSizeGuard { vars: usize, max: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex pivot cap {cap} exceeded")]
    PivotCapExceeded { cap: usize },
    #[error("image is entirely zero")]
    AllZeroImage,
    #[error("PGM format error: {0}")]
    PgmFormat(String),
    #[error("instance format error: {0}")]
    InstanceFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
