//! Numerical tolerances shared by validation, solvers and oracles.

/// Probability masses and population weights must sum to one within this.
pub const PROB_SUM: f64 = 1e-9;

/// Slack on the CDF endpoint conditions `F(lo) = 0`, `F(hi) = 1`.
pub const CDF_ENDPOINT: f64 = 1e-9;

/// Allowed increase between successive finite-difference slopes of the
/// revenue curve before it is declared non-concave.
pub const CONCAVITY_SLOPE: f64 = 1e-7;

/// Number of equispaced points used by the concavity and CDF certificates.
pub const CERTIFICATE_POINTS: usize = 1001;

/// Additive slack for `|p_i - p_j| <= alpha * d_ij`.
pub const FAIRNESS: f64 = 1e-9;

/// Price tolerance for golden-section search on concave revenue.
pub const GOLDEN_PRICE: f64 = 1e-10;

/// Slack for symmetry and the triangle inequality of explicit metrics.
pub const METRIC: f64 = 1e-9;

/// Critical pivots closer than this (relative to the larger support end)
/// are treated as one point.
pub const PIVOT_MERGE: f64 = 1e-12;
