//! Optimal fair prices for continuous markets with concave revenue curves.
//!
//! Maximizes `sum_i beta_i pi_i(p_i)` over the box `[lo, hi]^K` intersected
//! with the bands `|p_i - p_j| <= alpha d_ij` by projected supergradient
//! ascent. The projection onto the intersection uses Dykstra's method.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linp::{opt_linp_ffp, LinPInputs};
use crate::market::{Market, Support};
use crate::revenue::{
    golden_section_max, is_alpha_fair, optimal_fp, total_revenue, Method, PriceVector, SolveReport,
};
use crate::tol;
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSolveConfig {
    pub max_iters: usize,
    /// Step `c / sqrt(t)` along the normalized supergradient, as a fraction
    /// of the support width.
    pub step_scale: f64,
    /// Stop once the best objective gains at most this much (relative to the
    /// unconstrained optimum) over `stall_window` iterations.
    pub convergence_tol: f64,
    pub stall_window: usize,
    /// The stall test is skipped before this many iterations.
    pub min_iters: usize,
    pub projection_tol: f64,
    pub max_projection_passes: usize,
    /// Keep the best-so-far objective after every iteration.
    pub record_trace: bool,
}

impl Default for ConvexSolveConfig {
    fn default() -> Self {
        ConvexSolveConfig {
            max_iters: 100_000,
            step_scale: 0.1,
            convergence_tol: 1e-8,
            stall_window: 100,
            min_iters: 1_000,
            projection_tol: 1e-10,
            max_projection_passes: 100_000,
            record_trace: false,
        }
    }
}

/// Euclidean projection of `p` onto the fair box by Dykstra's cyclic
/// projections. Each band step moves the offending pair symmetrically by
/// half the excess.
pub fn project_fair(p: &[f64], d: &[Vec<f64>], alpha: f64, support: Support, tol: f64) -> Result<PriceVector> {
    project_fair_with(p, d, alpha, support, tol, ConvexSolveConfig::default().max_projection_passes)
        .map(|(x, _)| x)
}

/// As [`project_fair`], also returning the number of passes used.
pub fn project_fair_with(
    p: &[f64],
    d: &[Vec<f64>],
    alpha: f64,
    support: Support,
    tol: f64,
    max_passes: usize,
) -> Result<(PriceVector, usize)> {
    let k = p.len();
    if d.len() != k || d.iter().any(|row| row.len() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            found: d.len(),
        });
    }
    let pairs: Vec<(usize, usize, f64)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, alpha * d[i][j]))
        .collect();
    let mut x = p.to_vec();
    let mut band_corr = vec![0.0; pairs.len()];
    let mut box_corr = vec![0.0; k];
    let mut residual = f64::INFINITY;
    for pass in 1..=max_passes {
        let start = x.clone();
        for (&(i, j, a), c) in pairs.iter().zip(band_corr.iter_mut()) {
            let yi = x[i] + *c;
            let yj = x[j] - *c;
            let diff = yi - yj;
            let shift = if diff > a {
                0.5 * (diff - a)
            } else if diff < -a {
                -0.5 * (-a - diff)
            } else {
                0.0
            };
            x[i] = yi - shift;
            x[j] = yj + shift;
            *c = shift;
        }
        for (xi, q) in x.iter_mut().zip(box_corr.iter_mut()) {
            let y = *xi + *q;
            let nx = support.clamp(y);
            *xi = nx;
            *q = y - nx;
        }
        residual = pairs
            .iter()
            .map(|&(i, j, a)| (x[i] - x[j]).abs() - a)
            .fold(0.0, f64::max);
        // Corrections can keep cycling after the iterate settles, so compare whole passes.
        let moved = x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < tol {
            if residual < tol {
                return Ok((PriceVector(x), pass));
            }
            // Nearly redundant constraints can stall the corrections just outside the set.
            return Ok((PriceVector(fair_envelope_midpoint(&x, &pairs)), pass));
        }
    }
    Err(Error::ProjectionDidNotConverge {
        residual,
        passes: max_passes,
    })
}

/// Midpoint of the largest fair minorant and smallest fair majorant of `x`.
///
/// Band widths are first closed under shortest paths, so both envelopes are fair
/// and stay within the range of `x`.
fn fair_envelope_midpoint(x: &[f64], pairs: &[(usize, usize, f64)]) -> Vec<f64> {
    let k = x.len();
    let mut w = vec![vec![0.0; k]; k];
    for &(i, j, a) in pairs {
        w[i][j] = a;
        w[j][i] = a;
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                let via = w[i][m] + w[m][j];
                if via < w[i][j] {
                    w[i][j] = via;
                }
            }
        }
    }
    (0..k)
        .map(|i| {
            let lower = (0..k).map(|j| x[j] - w[i][j]).fold(f64::NEG_INFINITY, f64::max);
            let upper = (0..k).map(|j| x[j] + w[i][j]).fold(f64::INFINITY, f64::min);
            0.5 * (lower + upper)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStart {
    /// The unconstrained optimum was already fair.
    Unconstrained,
    /// All prices forced equal; solved as a one-dimensional problem.
    Uniform,
    ProjectedOptimum,
    Pivot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSolution {
    pub prices: PriceVector,
    pub revenue: f64,
    pub warm_start: WarmStart,
    pub iterations: usize,
    pub projection_passes: usize,
    /// Best objective after each iteration, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

fn supergradient(market: &Market, x: &[f64], g: &mut [f64]) {
    for ((gi, s), &p) in g.iter_mut().zip(market.segments()).zip(x) {
        *gi = match &s.valuation {
            Valuation::Continuous(v) => s.beta * v.slope(p),
            Valuation::Discrete(_) => unreachable!("checked continuous"),
        };
    }
}

/// Runs the ascent and returns the best fair iterate.
pub fn optimize_fair_convex(market: &Market, alpha: f64, cfg: &ConvexSolveConfig) -> Result<ConvexSolution> {
    if market.is_discrete() {
        return Err(Error::UnsupportedShape(
            "convex solver needs continuous valuations; use the discrete or linp method".into(),
        ));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let support = market.support();
    let d = market.distances();
    let fp = optimal_fp(market);
    let fp_revenue = fp.total(&market.betas());
    let objective = |x: &[f64]| total_revenue(market, x).expect("length fixed");

    if is_alpha_fair(&fp.prices, d, alpha).fair {
        return Ok(ConvexSolution {
            revenue: fp_revenue,
            prices: fp.prices,
            warm_start: WarmStart::Unconstrained,
            iterations: 0,
            projection_passes: 0,
            trace: cfg.record_trace.then(Vec::new),
        });
    }

    let k = market.len();
    let all_tied = (0..k).all(|i| (0..k).all(|j| alpha * d[i][j] == 0.0));
    if all_tied {
        let (p, revenue) = golden_section_max(
            |p| market.segments().iter().map(|s| s.beta * s.revenue(p)).sum(),
            support.lo,
            support.hi,
            tol::GOLDEN_PRICE,
        );
        let prices = vec![p; k];
        return Ok(ConvexSolution {
            revenue: objective(&prices),
            prices: PriceVector(prices),
            warm_start: WarmStart::Uniform,
            iterations: 0,
            projection_passes: 0,
            trace: cfg.record_trace.then(|| vec![revenue]),
        });
    }

    let project = |y: &[f64]| project_fair_with(y, d, alpha, support, cfg.projection_tol, cfg.max_projection_passes);
    let (projected, mut passes) = project(&fp.prices)?;
    let (linp_inputs, _) = LinPInputs::from_market(market, alpha)?;
    let pivot = opt_linp_ffp(&linp_inputs).prices;
    let (v_proj, v_pivot) = (objective(&projected), objective(&pivot));
    let (mut x, mut best_val, warm_start) = if v_pivot > v_proj {
        (pivot.0, v_pivot, WarmStart::Pivot)
    } else {
        (projected.0, v_proj, WarmStart::ProjectedOptimum)
    };
    let mut best_x = x.clone();
    let mut trace = cfg.record_trace.then(|| Vec::with_capacity(1024));
    let step = cfg.step_scale * support.width();
    let stall = cfg.convergence_tol * fp_revenue.abs();
    let mut window_start = best_val;
    let mut g = vec![0.0; k];
    let mut y = vec![0.0; k];
    let mut iterations = 0;

    for t in 1..=cfg.max_iters {
        iterations = t;
        supergradient(market, &x, &mut g);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let eta = step / (t as f64).sqrt() / norm;
        for ((yi, xi), gi) in y.iter_mut().zip(&x).zip(&g) {
            *yi = xi + eta * gi;
        }
        let (next, used) = project(&y)?;
        passes += used;
        x = next.0;
        let val = objective(&x);
        if val > best_val {
            best_val = val;
            best_x.copy_from_slice(&x);
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(best_val);
        }
        if t % cfg.stall_window == 0 {
            if t >= cfg.min_iters && best_val - window_start <= stall {
                break;
            }
            window_start = best_val;
        }
    }

    Ok(ConvexSolution {
        prices: PriceVector(best_x),
        revenue: best_val,
        warm_start,
        iterations,
        projection_passes: passes,
        trace,
    })
}

/// Optimal fair prices for a continuous market.
pub fn solve_ffp_convex(market: &Market, alpha: f64, cfg: &ConvexSolveConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let sol = optimize_fair_convex(market, alpha, cfg)?;
    let fp = optimal_fp(market);
    let mut report = SolveReport::evaluate(market, Method::Convex, alpha, &fp, sol.prices.0.clone(), start.elapsed());
    report.details = Some(serde_json::json!({
        "warm_start": sol.warm_start,
        "iterations": sol.iterations,
        "projection_passes": sol.projection_passes,
    }));
    Ok(report)
}
