//! Exact fair pricing for two segments sharing a finite valuation set.
//!
//! Revenue is piecewise constant in each price with jumps only at
//! valuations, so some optimal fair pair has one price on a valuation and
//! the other either on a valuation or exactly `alpha * d12` away from it.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::Market;
use crate::revenue::{is_alpha_fair, optimal_fp, total_revenue, Method, SolveReport};
use crate::tol;
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateLabel {
    /// Both segments pay the same valuation.
    SingleValue,
    /// Both segments pay (different) valuations within reach of each other.
    ValuePair,
    /// One segment pays a valuation, the other sits on the fairness boundary.
    OffsetPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSupport {
    pub label: CandidateLabel,
    pub prices: [f64; 2],
}

/// Fair candidate pairs for ascending `values` and offset `alpha * d12`.
///
/// Emits the uniform pairs, every valuation pair already within reach, and
/// `(v_j, v_j ± offset)` in both orders with prices clipped at zero. Exact
/// duplicates are dropped, keeping the first label.
pub fn candidate_supports(values: &[f64], alpha: f64, d12: f64) -> Vec<CandidateSupport> {
    let offset = alpha * d12;
    let mut out: Vec<CandidateSupport> = Vec::with_capacity(values.len() * (values.len() + 4));
    let mut push = |label, prices: [f64; 2]| {
        if prices.iter().all(|p| p.is_finite()) && !out.iter().any(|c| c.prices == prices) {
            out.push(CandidateSupport { label, prices });
        }
    };
    for &v in values {
        push(CandidateLabel::SingleValue, [v, v]);
    }
    for &v in values {
        for &w in values {
            if v != w && (v - w).abs() <= offset + tol::FAIRNESS {
                push(CandidateLabel::ValuePair, [v, w]);
            }
        }
    }
    for &v in values {
        for other in [v + offset, (v - offset).max(0.0)] {
            push(CandidateLabel::OffsetPair, [v, other]);
            push(CandidateLabel::OffsetPair, [other, v]);
        }
    }
    out
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Optimal fair prices for a two-segment discrete market.
pub fn solve_ffp_discrete(market: &Market, alpha: f64) -> Result<SolveReport> {
    let start = Instant::now();
    let values = market
        .value_set()
        .ok_or_else(|| Error::UnsupportedShape("discrete solver needs a discrete market; use the convex or linp method".into()))?;
    if market.len() != 2 {
        return Err(Error::UnsupportedShape(format!(
            "discrete solver handles exactly 2 segments, got {}; use the linp method",
            market.len()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let fp = optimal_fp(market);
    let d = market.distances();
    let d12 = d[0][1];

    let (prices, label) = if is_alpha_fair(&fp.prices, d, alpha).fair {
        (fp.prices.0.clone(), None)
    } else {
        let mut best: Option<(f64, CandidateSupport)> = None;
        for c in candidate_supports(values, alpha, d12) {
            if !is_alpha_fair(&c.prices, d, alpha).fair {
                continue;
            }
            let revenue = total_revenue(market, &c.prices)?;
            let better = match &best {
                None => true,
                Some((r, b)) => revenue > *r || (revenue == *r && lex_less(&c.prices, &b.prices)),
            };
            if better {
                best = Some((revenue, c));
            }
        }
        let (_, c) = best.expect("uniform candidates are always fair");
        (c.prices.to_vec(), Some(c.label))
    };

    let mut report = SolveReport::evaluate(market, Method::Discrete, alpha, &fp, prices, start.elapsed());
    let mut details = serde_json::Map::new();
    details.insert("candidate".into(), serde_json::to_value(label)?);
    if let Some(case) = binary_case_cof(market, alpha * d12) {
        details.insert("case_formula".into(), serde_json::to_value(case)?);
    }
    report.details = Some(serde_json::Value::Object(details));
    Ok(report)
}

/// Closed-form cost of fairness for the two clamped regimes of a binary
/// market. Case 3 has `p_hat = (v2, v1)` answered by `(v1 + alpha d12, v1)`;
/// case 4 is its mirror image with the segments swapped.
/// `None` marks a vanishing denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseCof {
    pub case3: Option<f64>,
    pub case4: Option<f64>,
}

impl CaseCof {
    pub fn case3(&self) -> Result<f64> {
        self.case3.ok_or(Error::DivergentCof)
    }

    pub fn case4(&self) -> Result<f64> {
        self.case4.ok_or(Error::DivergentCof)
    }
}

fn case_ratio(beta: f64, q: f64, v1: f64, v2: f64, offset: f64) -> Option<f64> {
    let num = beta * v2 * (1.0 - q) + (1.0 - beta) * v1;
    let den = beta * (v1 + offset) * (1.0 - q) + (1.0 - beta) * v1;
    (den != 0.0).then(|| num / den)
}

/// `q_i` is the probability that a segment-`i` consumer values at `v1`;
/// `beta` is segment 1's weight.
pub fn cof_case_formula(beta: f64, q1: f64, q2: f64, v1: f64, v2: f64, alpha_d12: f64) -> Result<CaseCof> {
    if !(v1 < v2) {
        return Err(Error::InvalidArgument(format!("need v1 < v2, got {v1} and {v2}")));
    }
    for (name, x) in [("beta", beta), ("q1", q1), ("q2", q2)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("{name} = {x} not in [0, 1]")));
        }
    }
    if !(alpha_d12 >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha * d12 = {alpha_d12} is negative")));
    }
    Ok(CaseCof {
        case3: case_ratio(beta, q1, v1, v2, alpha_d12),
        case4: case_ratio(1.0 - beta, q2, v1, v2, alpha_d12),
    })
}

fn binary_case_cof(market: &Market, offset: f64) -> Option<CaseCof> {
    let values = market.value_set()?;
    if values.len() != 2 || market.len() != 2 {
        return None;
    }
    let low_mass = |i: usize| match &market.segments()[i].valuation {
        Valuation::Discrete(v) => v.probs[0],
        Valuation::Continuous(_) => unreachable!("discrete market"),
    };
    cof_case_formula(market.segments()[0].beta, low_mass(0), low_mass(1), values[0], values[1], offset).ok()
}
