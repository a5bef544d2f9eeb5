//! Method routing and alpha sweeps.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::convex::{solve_ffp_convex, ConvexSolveConfig};
use crate::discrete::solve_ffp_discrete;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linp::{opt_linp_ffp, LinPInputs};
use crate::market::Market;
use crate::revenue::{Method, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Discrete solver for two-segment discrete markets, pivot pricing for
    /// other discrete markets, convex solver (checked against pivot
    /// pricing) for continuous ones.
    #[default]
    Auto,
    Discrete,
    Convex,
    Linp,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::Auto => "auto",
            SolveMethod::Discrete => "discrete",
            SolveMethod::Convex => "convex",
            SolveMethod::Linp => "linp",
        }
    }
}

/// Pivot-based fair prices evaluated on the full market.
pub fn solve_linp(market: &Market, alpha: f64) -> Result<SolveReport> {
    let start = Instant::now();
    let (inputs, fp) = LinPInputs::from_market(market, alpha)?;
    let sol = opt_linp_ffp(&inputs);
    let mut report = SolveReport::evaluate(market, Method::Linp, alpha, &fp, sol.prices.0.clone(), start.elapsed());
    report.ffp_lower_bound = Some(sol.lower_bound);
    report.details = Some(serde_json::json!({
        "pivot": sol.pivot,
        "gammas": sol.gammas,
        "critical_points": sol.critical_points.len(),
        "probes": sol.probes,
    }));
    Ok(report)
}

pub fn solve(market: &Market, alpha: f64, method: SolveMethod, cfg: &ConvexSolveConfig) -> Result<SolveReport> {
    match method {
        SolveMethod::Discrete => solve_ffp_discrete(market, alpha),
        SolveMethod::Convex => solve_ffp_convex(market, alpha, cfg),
        SolveMethod::Linp => solve_linp(market, alpha),
        SolveMethod::Auto if market.is_discrete() => {
            if market.len() == 2 {
                solve_ffp_discrete(market, alpha)
            } else {
                solve_linp(market, alpha)
            }
        }
        SolveMethod::Auto => {
            let start = Instant::now();
            let convex = solve_ffp_convex(market, alpha, cfg)?;
            let linp = solve_linp(market, alpha)?;
            let (cr, lr) = (convex.ffp_revenue.unwrap_or(0.0), linp.ffp_revenue.unwrap_or(0.0));
            let mut report = if lr > cr { linp } else { convex };
            let cross_check = serde_json::json!({
                "convex_revenue": cr,
                "linp_revenue": lr,
                "winner": report.method,
            });
            match report.details.as_mut() {
                Some(serde_json::Value::Object(map)) => {
                    map.insert("cross_check".into(), cross_check);
                }
                _ => report.details = Some(serde_json::json!({ "cross_check": cross_check })),
            }
            report.wall_time = start.elapsed();
            Ok(report)
        }
    }
}

/// `steps` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("steps must be >= 2, got {steps}")));
    }
    if !(min >= 0.0 && max >= min && max.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad alpha range [{min}, {max}]")));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { max } else { min + (max - min) * i as f64 / last })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub fp_revenue: f64,
    pub ffp_revenue: f64,
    /// `None` when the fair revenue vanishes.
    pub cof: Option<f64>,
    pub bound: f64,
}

/// One solve per alpha; rows come back in input order whatever `exec` is.
pub fn sweep(
    market: &Market,
    alphas: &[f64],
    method: SolveMethod,
    cfg: &ConvexSolveConfig,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    exec.map_slice(alphas, |&alpha| {
        let r = solve(market, alpha, method, cfg)?;
        Ok(SweepRow {
            alpha,
            fp_revenue: r.fp_revenue,
            ffp_revenue: r.ffp_revenue.unwrap_or(0.0),
            cof: r.cof,
            bound: r.cof_bound,
        })
    })
    .into_iter()
    .collect()
}
