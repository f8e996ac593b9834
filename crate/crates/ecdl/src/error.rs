//! Crate-wide error type.

use crate::lasso::LassoFit;

/// Errors produced anywhere in the inference pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A design column has zero variance and cannot be standardized.
    #[error("column {0} is constant (zero variance)")]
    ConstantColumn(usize),

    /// Shapes or counts do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Coordinate descent stopped at `max_iterations` above the gap tolerance.
    /// Carries the best iterate so the caller may accept it.
    #[error("lasso did not converge: dual gap {gap:.3e} after {iterations} sweeps")]
    NotConverged {
        gap: f64,
        iterations: usize,
        fit: Box<LassoFit>,
    },

    /// Nodewise residual is (numerically) orthogonal to its own column,
    /// which happens for perfectly collinear designs.
    #[error("degenerate nodewise residual for feature {0} (collinear design)")]
    DegenerateResidual(usize),

    /// Residual degrees of freedom are non-positive.
    #[error("degenerate degrees of freedom: n = {n}, df = {df}")]
    DegenerateDf { n: usize, df: usize },

    /// The connectivity graph does not span all features.
    #[error("connectivity graph is disconnected")]
    DisconnectedGraph,

    /// Requested cluster count is outside [1, p].
    #[error("invalid cluster count {c} for {p} features")]
    InvalidC { c: usize, p: usize },

    /// The clustering subsample would have fewer than two rows.
    #[error("subsample of {0} rows is too small for clustering")]
    SubsampleTooSmall(usize),

    /// An aggregation or metric input was empty.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A simulation specification violates its invariants.
    #[error("invalid simulation spec: {0}")]
    Spec(String),

    /// The realized noise vector is identically zero.
    #[error("noise vector has zero norm")]
    DegenerateNoise,

    /// The noiseless signal X w* is identically zero.
    #[error("signal X·w* has zero norm")]
    ZeroSignal,

    /// No positive labels remain after exclusions.
    #[error("no positive labels for precision-recall")]
    NoPositives,

    /// A map is constant, so Pearson correlation is undefined.
    #[error("constant map has no correlation")]
    ConstantMap,

    /// Matrix file on disk is malformed or corrupt.
    #[error("matrix file error: {0}")]
    MatrixFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
