//! Revenue evaluation, unconstrained optimal pricing, the fairness check,
//! and the cost-of-fairness quantities.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Market, Segment, Support};
use crate::tol;
use crate::valuation::{ContinuousValuation, Valuation};

/// One price per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(pub Vec<f64>);

impl PriceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for PriceVector {
    fn from(v: Vec<f64>) -> Self {
        PriceVector(v)
    }
}

impl std::ops::Deref for PriceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Expected revenue per consumer of one segment at price `p`.
pub fn segment_revenue(seg: &Segment, p: f64) -> f64 {
    seg.revenue(p)
}

/// `sum_k beta_k * pi_k(p_k)`.
pub fn total_revenue(market: &Market, prices: &[f64]) -> Result<f64> {
    if prices.len() != market.len() {
        return Err(Error::LengthMismatch {
            expected: market.len(),
            found: prices.len(),
        });
    }
    Ok(market
        .segments()
        .iter()
        .zip(prices)
        .map(|(s, &p)| s.beta * s.revenue(p))
        .sum())
}

/// Unconstrained optimal feature-based prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpSolution {
    pub prices: PriceVector,
    /// Per-segment optimal revenue at `prices`.
    pub revenues: Vec<f64>,
}

impl FpSolution {
    pub fn total(&self, betas: &[f64]) -> f64 {
        betas.iter().zip(&self.revenues).map(|(b, r)| b * r).sum()
    }
}

/// Per-segment revenue maximization.
pub fn optimal_fp(market: &Market) -> FpSolution {
    let (prices, revenues) = market
        .segments()
        .iter()
        .map(|s| optimal_segment_price(&s.valuation))
        .unzip();
    FpSolution {
        prices: PriceVector(prices),
        revenues,
    }
}

pub fn optimal_segment_price(valuation: &Valuation) -> (f64, f64) {
    match valuation {
        Valuation::Discrete(v) => v.optimal_price(),
        Valuation::Continuous(v) => optimal_continuous_price(v),
    }
}

fn optimal_continuous_price(v: &ContinuousValuation) -> (f64, f64) {
    if let Some(p) = v.closed_form_optimum() {
        return (p, v.revenue(p));
    }
    let Support { lo, hi } = v.support();
    golden_section_max(|p| v.revenue(p), lo, hi, tol::GOLDEN_PRICE)
}

/// Maximizes a unimodal function on `[a, b]` to within `tol` in the argument.
/// The endpoints are compared at the end so boundary maxima are exact.
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(a, f(a)), (mid, f(mid)), (b, f(b))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Outcome of the pairwise fairness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessCertificate {
    pub alpha: f64,
    pub fair: bool,
    /// `max_{i<j} |p_i - p_j| - alpha * d_ij`; negative means slack everywhere.
    pub max_excess: f64,
    /// Pair attaining `max_excess` (0-based, `i < j`); `None` when `K = 1`.
    pub worst_pair: Option<(usize, usize)>,
}

impl FairnessCertificate {
    /// The worst violating pair and its excess, if the check failed.
    pub fn violation(&self) -> Option<(usize, usize, f64)> {
        if self.fair {
            None
        } else {
            self.worst_pair.map(|(i, j)| (i, j, self.max_excess))
        }
    }
}

/// Checks `|p_i - p_j| <= alpha * d_ij + 1e-9` for every pair.
pub fn is_alpha_fair(prices: &[f64], d: &[Vec<f64>], alpha: f64) -> FairnessCertificate {
    let k = prices.len();
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_pair = None;
    for i in 0..k {
        for j in i + 1..k {
            let excess = (prices[i] - prices[j]).abs() - alpha * d[i][j];
            if excess > max_excess {
                max_excess = excess;
                worst_pair = Some((i, j));
            }
        }
    }
    FairnessCertificate {
        alpha,
        fair: max_excess <= tol::FAIRNESS,
        max_excess,
        worst_pair,
    }
}

/// `fp_revenue / ffp_revenue`; a zero fair revenue is reported as divergence.
pub fn cost_of_fairness(fp_revenue: f64, ffp_revenue: f64) -> Result<f64> {
    if ffp_revenue <= 0.0 {
        return Err(Error::DivergentCof);
    }
    Ok(fp_revenue / ffp_revenue)
}

/// Worst-case cost of fairness for concave revenue:
/// `2 / (1 + min(alpha * min_i D_i / (hi - lo), 1))`.
pub fn cof_bound(alpha: f64, min_dists: &[f64], support: Support) -> f64 {
    let d_min = min_dists.iter().copied().fold(f64::INFINITY, f64::min);
    if d_min.is_infinite() {
        // no pair of segments, nothing to constrain
        return 1.0;
    }
    let ratio = (alpha * d_min / support.width()).min(1.0);
    2.0 / (1.0 + ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Discrete,
    Convex,
    Linp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Discrete => "discrete",
            Method::Convex => "convex",
            Method::Linp => "linp",
        }
    }
}

/// Summary of a fair pricing solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub alpha: f64,
    pub fp_prices: PriceVector,
    /// Per-segment optimal revenues under `fp_prices`.
    pub fp_segment_revenues: Vec<f64>,
    pub fp_revenue: f64,
    pub ffp_prices: PriceVector,
    /// True fair revenue; `None` when only peak statistics were available.
    pub ffp_revenue: Option<f64>,
    /// Certified lower bound on the fair revenue (pivot-based pricing only).
    pub ffp_lower_bound: Option<f64>,
    /// `None` when the fair revenue is zero (divergent).
    pub cof: Option<f64>,
    pub cof_bound: f64,
    pub fairness: FairnessCertificate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SolveReport {
    /// Assembles a report for fair prices evaluated against full distributions.
    pub(crate) fn evaluate(
        market: &Market,
        method: Method,
        alpha: f64,
        fp: &FpSolution,
        ffp_prices: Vec<f64>,
        wall_time: Duration,
    ) -> Self {
        let fp_revenue = fp.total(&market.betas());
        let ffp_revenue = total_revenue(market, &ffp_prices).expect("length checked by solver");
        SolveReport {
            method,
            alpha,
            fp_prices: fp.prices.clone(),
            fp_segment_revenues: fp.revenues.clone(),
            fp_revenue,
            fairness: is_alpha_fair(&ffp_prices, market.distances(), alpha),
            ffp_prices: PriceVector(ffp_prices),
            ffp_revenue: Some(ffp_revenue),
            ffp_lower_bound: None,
            cof: cost_of_fairness(fp_revenue, ffp_revenue).ok(),
            cof_bound: cof_bound(alpha, market.min_distances(), market.support()),
            details: None,
            wall_time,
        }
    }
}
