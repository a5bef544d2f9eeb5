//! Market data model: support, segments, metric, and structural validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;
use crate::valuation::{ContinuousValuation, DiscreteValuation, Family, Valuation};

/// Common valuation support `[lo, hi]`; `lo` doubles as marginal cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let s = Support { lo, hi };
        match s.problem() {
            None => Ok(s),
            Some(msg) => Err(Error::InvalidArgument(msg)),
        }
    }

    fn problem(&self) -> Option<String> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            Some("support bounds must be finite".to_string())
        } else if self.lo < 0.0 {
            Some(format!("support lower bound {} < 0", self.lo))
        } else if !(self.lo < self.hi) {
            Some(format!("support requires lo < hi, got [{}, {}]", self.lo, self.hi))
        } else {
            None
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.lo, self.hi)
    }
}

/// Valuation model as written in a market file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ValuationSpec {
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Uniform,
    Power { exponent: f64 },
    TruncExp { rate: f64 },
    TriangleRevenue { peak_price: f64, peak_revenue: f64 },
    EmpiricalCdf { knots: Vec<[f64; 2]> },
}

impl ValuationSpec {
    fn family(&self) -> Option<Family> {
        Some(match self {
            ValuationSpec::Discrete { .. } => return None,
            ValuationSpec::Uniform => Family::Uniform,
            ValuationSpec::Power { exponent } => Family::Power {
                exponent: *exponent,
            },
            ValuationSpec::TruncExp { rate } => Family::TruncExp { rate: *rate },
            ValuationSpec::TriangleRevenue {
                peak_price,
                peak_revenue,
            } => Family::TriangleRevenue {
                peak_price: *peak_price,
                peak_revenue: *peak_revenue,
            },
            ValuationSpec::EmpiricalCdf { knots } => Family::EmpiricalCdf {
                knots: knots.clone(),
            },
        })
    }
}

impl From<Family> for ValuationSpec {
    fn from(f: Family) -> Self {
        match f {
            Family::Uniform => ValuationSpec::Uniform,
            Family::Power { exponent } => ValuationSpec::Power { exponent },
            Family::TruncExp { rate } => ValuationSpec::TruncExp { rate },
            Family::TriangleRevenue {
                peak_price,
                peak_revenue,
            } => ValuationSpec::TriangleRevenue {
                peak_price,
                peak_revenue,
            },
            Family::EmpiricalCdf { knots } => ValuationSpec::EmpiricalCdf { knots },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub feature: Vec<f64>,
    pub beta: f64,
    pub valuation: ValuationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Metric {
    /// `d_ij = ||x_i - x_j||_2` over segment features.
    Euclidean,
    /// Explicit distance matrix, for categorical features.
    Matrix { d: Vec<Vec<f64>> },
}

/// A market as read from a file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub support: Support,
    pub metric: Metric,
    pub segments: Vec<SegmentSpec>,
}

impl MarketSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("market spec serializes")
    }
}

/// Every violated invariant of a market spec; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Collects every violated invariant. Never aborts early.
pub fn validate(spec: &MarketSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let support_ok = match spec.support.problem() {
        Some(msg) => {
            report.push(msg);
            false
        }
        None => true,
    };

    let k = spec.segments.len();
    if k == 0 {
        report.push("market has no segments");
        return report;
    }

    for (i, seg) in spec.segments.iter().enumerate() {
        if !(seg.beta > 0.0 && seg.beta <= 1.0) {
            report.push(format!("segment {}: beta = {} outside (0, 1]", i + 1, seg.beta));
        }
    }
    let beta_sum: f64 = spec.segments.iter().map(|s| s.beta).sum();
    if (beta_sum - 1.0).abs() > tol::PROB_SUM {
        report.push(format!("beta sum = {beta_sum} ≠ 1"));
    }

    let discrete = spec
        .segments
        .iter()
        .filter(|s| matches!(s.valuation, ValuationSpec::Discrete { .. }))
        .count();
    if discrete != 0 && discrete != k {
        report.push("segments mix discrete and continuous valuations");
    }

    let mut first_values: Option<&Vec<f64>> = None;
    for (i, seg) in spec.segments.iter().enumerate() {
        match &seg.valuation {
            ValuationSpec::Discrete { values, probs } => {
                let v = DiscreteValuation {
                    values: values.clone(),
                    probs: probs.clone(),
                };
                for p in v.problems() {
                    report.push(format!("segment {}: {p}", i + 1));
                }
                match first_values {
                    None => first_values = Some(values),
                    Some(first) if first != values => {
                        report.push(format!(
                            "segment {}: valuation set differs from segment 1",
                            i + 1
                        ));
                    }
                    _ => {}
                }
                if support_ok
                    && values
                        .iter()
                        .any(|v| *v < spec.support.lo || *v > spec.support.hi)
                {
                    report.push(format!("segment {}: valuations outside the support", i + 1));
                }
            }
            other => {
                if support_ok {
                    let family = other.family().expect("continuous");
                    for p in ContinuousValuation::problems(&family, spec.support) {
                        report.push(format!("segment {}: {p}", i + 1));
                    }
                }
            }
        }
    }

    match &spec.metric {
        Metric::Euclidean => {
            let dim = spec.segments[0].feature.len();
            for (i, seg) in spec.segments.iter().enumerate() {
                if seg.feature.len() != dim {
                    report.push(format!(
                        "segment {}: feature dimension {} ≠ {}",
                        i + 1,
                        seg.feature.len(),
                        dim
                    ));
                }
                if seg.feature.iter().any(|x| !x.is_finite()) {
                    report.push(format!("segment {}: non-finite feature", i + 1));
                }
            }
        }
        Metric::Matrix { d } => metric_problems(d, k, &mut report),
    }
    report
}

fn metric_problems(d: &[Vec<f64>], k: usize, report: &mut ValidationReport) {
    if d.len() != k || d.iter().any(|row| row.len() != k) {
        report.push(format!("distance matrix must be {k}x{k}"));
        return;
    }
    if d.iter().flatten().any(|x| !x.is_finite()) {
        report.push("distance matrix has non-finite entries");
        return;
    }
    for i in 0..k {
        if d[i][i] != 0.0 {
            report.push(format!("d({},{}) = {} ≠ 0", i + 1, i + 1, d[i][i]));
        }
        for j in 0..k {
            if d[i][j] < 0.0 {
                report.push(format!("d({},{}) < 0", i + 1, j + 1));
            }
            if i < j && (d[i][j] - d[j][i]).abs() > tol::METRIC {
                report.push(format!("asymmetric distance ({},{})", i + 1, j + 1));
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            if (0..k).any(|m| d[i][j] > d[i][m] + d[m][j] + tol::METRIC) {
                report.push(format!("triangle inequality ({},{})", i + 1, j + 1));
            }
        }
    }
}

/// `d_ij` for every pair of segments.
pub fn pairwise_distances(spec: &MarketSpec) -> Result<Vec<Vec<f64>>> {
    match &spec.metric {
        Metric::Matrix { d } => Ok(d.clone()),
        Metric::Euclidean => {
            let feats: Vec<&[f64]> = spec.segments.iter().map(|s| s.feature.as_slice()).collect();
            euclidean_distances(&feats)
        }
    }
}

pub fn euclidean_distances(features: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let dim = features.first().map_or(0, |f| f.len());
    if let Some((i, f)) = features.iter().enumerate().find(|(_, f)| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            segment: i,
            expected: dim,
            found: f.len(),
        });
    }
    let k = features.len();
    let mut d = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let dist = features[i]
                .iter()
                .zip(features[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    Ok(d)
}

/// `D_i = min_{j != i} d_ij`.
pub fn min_distances(d: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = d.len();
    if k < 2 {
        return Err(Error::SingleSegment);
    }
    Ok((0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| d[i][j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// `D_i` for scalar features in `O(K log K)`: the nearest neighbour of a
/// point on the line is one of its two neighbours in sorted order.
pub fn min_distances_1d(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 2 {
        return Err(Error::SingleSegment);
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![f64::INFINITY; xs.len()];
    for w in order.windows(2) {
        let gap = (xs[w[1]] - xs[w[0]]).abs();
        out[w[0]] = out[w[0]].min(gap);
        out[w[1]] = out[w[1]].min(gap);
    }
    Ok(out)
}

/// A validated segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub feature: Vec<f64>,
    pub beta: f64,
    pub valuation: Valuation,
}

impl Segment {
    pub fn revenue(&self, p: f64) -> f64 {
        self.valuation.revenue(p)
    }
}

/// A validated, immutable market with its distance data precomputed.
#[derive(Debug, Clone)]
pub struct Market {
    spec: MarketSpec,
    segments: Vec<Segment>,
    distances: Vec<Vec<f64>>,
    min_distances: Vec<f64>,
}

impl Market {
    pub fn from_spec(spec: MarketSpec) -> Result<Self> {
        let report = validate(&spec);
        if !report.is_valid() {
            return Err(Error::InvalidMarket(report));
        }
        let segments = spec
            .segments
            .iter()
            .map(|s| {
                let valuation = match &s.valuation {
                    ValuationSpec::Discrete { values, probs } => {
                        Valuation::Discrete(DiscreteValuation {
                            values: values.clone(),
                            probs: probs.clone(),
                        })
                    }
                    other => Valuation::Continuous(ContinuousValuation::new(
                        other.family().expect("continuous"),
                        spec.support,
                    )?),
                };
                Ok(Segment {
                    feature: s.feature.clone(),
                    beta: s.beta,
                    valuation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let distances = pairwise_distances(&spec)?;
        // A lone segment has no neighbour, so its fairness radius is unbounded.
        let min_distances = if segments.len() == 1 {
            vec![f64::INFINITY]
        } else {
            min_distances(&distances)?
        };
        Ok(Market {
            spec,
            segments,
            distances,
            min_distances,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(MarketSpec::from_json(text)?)
    }

    pub fn spec(&self) -> &MarketSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn support(&self) -> Support {
        self.spec.support
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn betas(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.beta).collect()
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    /// `D_i`; a single-segment market reports `+inf`.
    pub fn min_distances(&self) -> &[f64] {
        &self.min_distances
    }

    pub fn is_discrete(&self) -> bool {
        self.segments[0].valuation.is_discrete()
    }

    /// The shared valuation set of a discrete market.
    pub fn value_set(&self) -> Option<&[f64]> {
        match &self.segments[0].valuation {
            Valuation::Discrete(v) => Some(&v.values),
            Valuation::Continuous(_) => None,
        }
    }
}
