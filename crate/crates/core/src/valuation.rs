//! Valuation distributions.
//!
//! Every model is described through its survival function
//! `S(p) = P(V >= p)`: a consumer facing price `p` buys iff her valuation is
//! at least `p`, so an atom sitting exactly at `p` counts as buyers. The
//! revenue per consumer is `p * S(p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::Support;
use crate::tol;

/// Finite valuation set with its probability mass function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteValuation {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteValuation {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let v = DiscreteValuation { values, probs };
        let problems = v.problems();
        if problems.is_empty() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    pub(crate) fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.values.is_empty() {
            out.push("valuation set is empty".to_string());
        }
        if self.values.len() != self.probs.len() {
            out.push(format!(
                "{} values but {} probabilities",
                self.values.len(),
                self.probs.len()
            ));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            out.push("valuations must be finite and >= 0".to_string());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            out.push("valuations must be strictly ascending".to_string());
        }
        if self.probs.iter().any(|q| !q.is_finite() || *q < 0.0) {
            out.push("probabilities must be finite and >= 0".to_string());
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > tol::PROB_SUM {
            out.push(format!("pmf sum = {sum} ≠ 1"));
        }
        out
    }

    /// `P(V >= p)`.
    pub fn survival(&self, p: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(v, _)| **v >= p)
            .map(|(_, q)| q)
            .sum()
    }

    pub fn revenue(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        p * self.survival(p)
    }

    /// Revenue-maximizing price over the value set; ties go to the lower price.
    pub fn optimal_price(&self) -> (f64, f64) {
        let mut best = (self.values[0], self.revenue(self.values[0]));
        for &v in &self.values[1..] {
            let r = self.revenue(v);
            if r > best.1 {
                best = (v, r);
            }
        }
        best
    }
}

/// Parametric and empirical families with concave revenue on the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// `F(p) = (p - lo) / (hi - lo)`.
    Uniform,
    /// `F(p) = ((p - lo) / (hi - lo))^k`.
    Power { exponent: f64 },
    /// Exponential with rate `lambda`, shifted to `lo` and truncated at `hi`.
    TruncExp { rate: f64 },
    /// Revenue curve is the triangle through `(lo, 0)`, the peak, and `(hi, 0)`.
    /// Consumers below the peak price all sit in an atom at `lo`.
    TriangleRevenue { peak_price: f64, peak_revenue: f64 },
    /// Piecewise-linear CDF through `(price, F(price))` knots.
    EmpiricalCdf { knots: Vec<[f64; 2]> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Power { .. } => "power",
            Family::TruncExp { .. } => "trunc-exp",
            Family::TriangleRevenue { .. } => "triangle-revenue",
            Family::EmpiricalCdf { .. } => "empirical-cdf",
        }
    }

    fn parameter_problems(&self, support: Support) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Family::Uniform => {}
            Family::Power { exponent } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    out.push(format!("power exponent must be > 0, got {exponent}"));
                }
            }
            Family::TruncExp { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    out.push(format!("trunc-exp rate must be > 0, got {rate}"));
                }
            }
            Family::TriangleRevenue {
                peak_price,
                peak_revenue,
            } => {
                if !(*peak_price > support.lo && *peak_price < support.hi) {
                    out.push(format!(
                        "triangle peak price {peak_price} must lie strictly inside ({}, {})",
                        support.lo, support.hi
                    ));
                }
                if !(peak_revenue.is_finite() && *peak_revenue > 0.0) {
                    out.push(format!(
                        "triangle peak revenue must be > 0, got {peak_revenue}"
                    ));
                }
            }
            Family::EmpiricalCdf { knots } => {
                if knots.len() < 2 {
                    out.push("empirical cdf needs at least two knots".to_string());
                    return out;
                }
                if knots.iter().flatten().any(|x| !x.is_finite()) {
                    out.push("empirical cdf knots must be finite".to_string());
                    return out;
                }
                if knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                    out.push("empirical cdf knot prices must be strictly ascending".to_string());
                }
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if (first[0] - support.lo).abs() > tol::CDF_ENDPOINT
                    || (last[0] - support.hi).abs() > tol::CDF_ENDPOINT
                {
                    out.push("empirical cdf knots must span the support exactly".to_string());
                }
                if knots.iter().any(|k| k[1] < -tol::CDF_ENDPOINT || k[1] > 1.0 + tol::CDF_ENDPOINT)
                {
                    out.push("empirical cdf values must lie in [0, 1]".to_string());
                }
            }
        }
        out
    }
}

/// A continuous valuation model bound to the market support.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousValuation {
    family: Family,
    support: Support,
}

impl ContinuousValuation {
    /// Builds the model and runs the CDF and concavity certificates.
    pub fn new(family: Family, support: Support) -> Result<Self> {
        let problems = Self::problems(&family, support);
        if problems.is_empty() {
            Ok(ContinuousValuation { family, support })
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    pub(crate) fn problems(family: &Family, support: Support) -> Vec<String> {
        let mut out = family.parameter_problems(support);
        if !out.is_empty() {
            return out;
        }
        let v = ContinuousValuation {
            family: family.clone(),
            support,
        };
        out.extend(v.cdf_problems());
        if out.is_empty() {
            if let Some((at, excess)) = v.concavity_violation() {
                out.push(format!(
                    "{} revenue is not concave near p = {at:.6} (slope increases by {excess:e})",
                    family.name()
                ));
            }
        }
        out
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn support(&self) -> Support {
        self.support
    }

    fn unit(&self, p: f64) -> f64 {
        (p - self.support.lo) / self.support.width()
    }

    /// `P(V >= p)`.
    pub fn survival(&self, p: f64) -> f64 {
        let Support { lo, hi } = self.support;
        if p <= lo {
            return 1.0;
        }
        if p > hi {
            return 0.0;
        }
        let t = self.unit(p);
        let s = match &self.family {
            Family::Uniform => 1.0 - t,
            Family::Power { exponent } => 1.0 - t.powf(*exponent),
            Family::TruncExp { rate } => {
                let w = self.support.width();
                let tail = (-rate * w).exp();
                ((-rate * (p - lo)).exp() - tail) / -(-rate * w).exp_m1()
            }
            Family::TriangleRevenue { .. } => self.triangle(p) / p,
            Family::EmpiricalCdf { knots } => 1.0 - interpolate(knots, p),
        };
        s.clamp(0.0, 1.0)
    }

    /// `P(V < p)`, the CDF with left-limit semantics.
    pub fn cdf(&self, p: f64) -> f64 {
        1.0 - self.survival(p)
    }

    fn triangle(&self, p: f64) -> f64 {
        let Support { lo, hi } = self.support;
        match self.family {
            Family::TriangleRevenue {
                peak_price,
                peak_revenue,
            } => {
                if p <= peak_price {
                    peak_revenue * (p - lo) / (peak_price - lo)
                } else {
                    peak_revenue * (hi - p) / (hi - peak_price)
                }
            }
            _ => unreachable!("triangle() called on {}", self.family.name()),
        }
    }

    pub fn revenue(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if let Family::TriangleRevenue { .. } = self.family {
            if p > self.support.lo && p <= self.support.hi {
                return self.triangle(p);
            }
        }
        p * self.survival(p)
    }

    /// Analytic derivative of the revenue curve (a supergradient at kinks),
    /// or `None` when the family has no closed form.
    pub fn revenue_derivative(&self, p: f64) -> Option<f64> {
        let Support { lo, hi } = self.support;
        let w = hi - lo;
        let t = self.unit(p);
        let d = match &self.family {
            Family::Uniform => 1.0 - t - p / w,
            Family::Power { exponent: k } => 1.0 - t.powf(*k) - p * k * t.powf(k - 1.0) / w,
            Family::TruncExp { rate } => {
                let denom = -(-rate * w).exp_m1();
                let ds = -rate * (-rate * (p - lo)).exp() / denom;
                self.survival(p) + p * ds
            }
            Family::TriangleRevenue {
                peak_price,
                peak_revenue,
            } => {
                if p < *peak_price {
                    peak_revenue / (peak_price - lo)
                } else if p > *peak_price {
                    -peak_revenue / (hi - peak_price)
                } else {
                    0.0
                }
            }
            Family::EmpiricalCdf { .. } => return None,
        };
        d.is_finite().then_some(d)
    }

    /// Central finite difference with step `1e-6 * (hi - lo)`, one-sided at
    /// the support ends.
    pub fn revenue_derivative_fd(&self, p: f64) -> f64 {
        let Support { lo, hi } = self.support;
        let h = 1e-6 * (hi - lo);
        let a = (p - h).max(lo);
        let b = (p + h).min(hi);
        (self.revenue(b) - self.revenue(a)) / (b - a)
    }

    /// Analytic derivative when available, finite difference otherwise.
    pub fn slope(&self, p: f64) -> f64 {
        self.revenue_derivative(p)
            .unwrap_or_else(|| self.revenue_derivative_fd(p))
    }

    /// Closed-form revenue maximizer, when the family has one.
    pub fn closed_form_optimum(&self) -> Option<f64> {
        let Support { lo, hi } = self.support;
        match self.family {
            Family::Uniform => Some((hi / 2.0).clamp(lo, hi)),
            Family::Power { exponent: k } if lo == 0.0 => Some(hi * (k + 1.0).powf(-1.0 / k)),
            Family::TriangleRevenue { peak_price, .. } => Some(peak_price),
            _ => None,
        }
    }

    /// Inverse-transform sample: the largest `p` with `S(p) >= 1 - u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let Support { lo, hi } = self.support;
        let w = hi - lo;
        match &self.family {
            Family::Uniform => lo + u * w,
            Family::Power { exponent } => lo + w * u.powf(1.0 / exponent),
            Family::TruncExp { rate } => lo - (u * (-rate * w).exp_m1()).ln_1p() / rate,
            _ => {
                let target = 1.0 - u;
                if self.survival(hi) >= target {
                    return hi;
                }
                let (mut a, mut b) = (lo, hi);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if self.survival(mid) >= target {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                a
            }
        }
    }

    fn cdf_problems(&self) -> Vec<String> {
        let Support { lo, hi } = self.support;
        let n = tol::CERTIFICATE_POINTS;
        let mut out = Vec::new();
        if let Family::EmpiricalCdf { knots } = &self.family {
            if knots[0][1].abs() > tol::CDF_ENDPOINT {
                out.push(format!("{} cdf: F(lo) ≠ 0", self.family.name()));
            }
        }
        if (self.raw_survival(hi)).abs() > tol::CDF_ENDPOINT {
            out.push(format!("{} cdf: F(hi) ≠ 1", self.family.name()));
        }
        let mut prev = f64::INFINITY;
        for k in 1..n {
            let p = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let s = self.raw_survival(p);
            if !(-tol::CDF_ENDPOINT..=1.0 + tol::CDF_ENDPOINT).contains(&s) {
                out.push(format!(
                    "{} cdf leaves [0, 1] at p = {p:.6}",
                    self.family.name()
                ));
                break;
            }
            if s > prev + tol::CDF_ENDPOINT {
                out.push(format!(
                    "{} cdf decreases near p = {p:.6}",
                    self.family.name()
                ));
                break;
            }
            prev = s;
        }
        out
    }

    /// Survival without the final clamp to [0, 1], for certificates.
    fn raw_survival(&self, p: f64) -> f64 {
        match &self.family {
            Family::TriangleRevenue { .. } if p > self.support.lo => self.triangle(p) / p,
            Family::EmpiricalCdf { knots } if p > self.support.lo => 1.0 - interpolate(knots, p),
            _ => self.survival(p),
        }
    }

    /// Checks that successive slopes of the revenue curve, sampled on the
    /// certificate grid, never increase by more than the tolerance. Returns
    /// the location and size of the worst increase otherwise.
    pub fn concavity_violation(&self) -> Option<(f64, f64)> {
        let Support { lo, hi } = self.support;
        let n = tol::CERTIFICATE_POINTS;
        let h = (hi - lo) / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|k| self.revenue(lo + h * k as f64)).collect();
        let slopes: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut worst: Option<(f64, f64)> = None;
        for (k, s) in slopes.windows(2).enumerate() {
            let excess = s[1] - s[0];
            if excess > tol::CONCAVITY_SLOPE && worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((lo + h * (k + 1) as f64, excess));
            }
        }
        worst
    }
}

fn interpolate(knots: &[[f64; 2]], p: f64) -> f64 {
    let idx = knots.partition_point(|k| k[0] <= p);
    if idx == 0 {
        return knots[0][1];
    }
    if idx == knots.len() {
        return knots[knots.len() - 1][1];
    }
    let [x0, y0] = knots[idx - 1];
    let [x1, y1] = knots[idx];
    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
}

/// A segment's valuation model.
#[derive(Debug, Clone, PartialEq)]
pub enum Valuation {
    Discrete(DiscreteValuation),
    Continuous(ContinuousValuation),
}

impl Valuation {
    pub fn revenue(&self, p: f64) -> f64 {
        match self {
            Valuation::Discrete(v) => v.revenue(p),
            Valuation::Continuous(v) => v.revenue(p),
        }
    }

    pub fn survival(&self, p: f64) -> f64 {
        match self {
            Valuation::Discrete(v) => v.survival(p),
            Valuation::Continuous(v) => v.survival(p),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Valuation::Discrete(_))
    }
}
