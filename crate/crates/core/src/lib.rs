//! Revenue-optimal price discrimination under individual fairness.
//!
//! A market is a set of consumer segments, each with a feature vector, a
//! population weight and a valuation distribution. A price vector is
//! `alpha`-fair when `|p_i - p_j| <= alpha * d(x_i, x_j)` for every pair of
//! segments. This crate computes the unconstrained optimum, exact or
//! near-exact fair optima, pivot-based fair prices that need only each
//! segment's revenue peak, and the resulting cost of fairness.
//!
//! ```
//! use fairprice::{Market, solve, SolveMethod, ConvexSolveConfig};
//!
//! let market = Market::from_json(r#"{
//!     "support": {"lo": 0.0, "hi": 1.0},
//!     "metric": {"kind": "euclidean"},
//!     "segments": [
//!         {"feature": [0.0], "beta": 0.5, "valuation": {"kind": "uniform"}},
//!         {"feature": [1.0], "beta": 0.5, "valuation": {"kind": "power", "exponent": 2.0}}
//!     ]
//! }"#).unwrap();
//! let report = solve(&market, 0.04, SolveMethod::Auto, &ConvexSolveConfig::default()).unwrap();
//! assert!(report.fairness.fair);
//! assert!(report.cof.unwrap() >= 1.0);
//! ```

pub mod convex;
pub mod discrete;
pub mod error;
pub mod exec;
pub mod linp;
pub mod market;
pub mod oracles;
pub mod revenue;
pub mod solve;
pub mod tol;
pub mod valuation;

pub use convex::{optimize_fair_convex, project_fair, solve_ffp_convex, ConvexSolution, ConvexSolveConfig};
pub use discrete::{candidate_supports, cof_case_formula, solve_ffp_discrete, CandidateSupport, CaseCof};
pub use error::{Error, Result};
pub use exec::Exec;
pub use linp::{critical_points, linear_lower_bound, linp_prices, opt_linp_ffp, pivot_objective, LinPInputs, LinPSolution};
pub use market::{validate, Market, MarketSpec, Metric, SegmentSpec, Support, ValidationReport, ValuationSpec};
pub use revenue::{
    cof_bound, cost_of_fairness, is_alpha_fair, optimal_fp, segment_revenue, total_revenue, FairnessCertificate,
    FpSolution, Method, PriceVector, SolveReport,
};
pub use solve::{linspace, solve, solve_linp, sweep, SolveMethod, SweepRow};
pub use valuation::{ContinuousValuation, DiscreteValuation, Family, Valuation};
