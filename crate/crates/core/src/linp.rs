//! Pivot-based fair pricing.
//!
//! Every segment's price is clamped to within `tau_i = alpha * D_i / 2` of a
//! common pivot `m`, which makes any pair of prices `alpha`-fair through the
//! triangle inequality. Only the unconstrained optimal prices `p_hat` and
//! peak revenues `pi_hat` are needed: each concave revenue curve is bounded
//! below by the two-piece linear function through `(lo, 0)`, the peak, and
//! `(hi, 0)`, which turns the pivot choice into maximizing a concave
//! piecewise-linear function of `m`. Its maximum sits on one of at most
//! `2K + 2` breakpoints and is found by binary search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;
use crate::market::{Market, Support};
use crate::revenue::{optimal_fp, FpSolution, PriceVector};

/// Everything the pivot search needs. No distribution is required beyond
/// each segment's revenue peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinPInputs {
    pub p_hat: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub beta: Vec<f64>,
    /// Distance to the nearest other segment; `+inf` for a lone segment.
    pub min_dist: Vec<f64>,
    /// Clamp radius `alpha * D_i / 2`.
    pub tau: Vec<f64>,
    pub support: Support,
    pub alpha: f64,
}

impl LinPInputs {
    pub fn new(
        p_hat: Vec<f64>,
        pi_hat: Vec<f64>,
        beta: Vec<f64>,
        min_dist: Vec<f64>,
        support: Support,
        alpha: f64,
    ) -> Result<Self> {
        let k = p_hat.len();
        for len in [pi_hat.len(), beta.len(), min_dist.len()] {
            if len != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    found: len,
                });
            }
        }
        if k == 0 {
            return Err(Error::InvalidArgument("no segments".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if let Some(p) = p_hat.iter().find(|p| !(**p >= support.lo && **p <= support.hi)) {
            return Err(Error::InvalidArgument(format!(
                "optimal price {p} outside [{}, {}]",
                support.lo, support.hi
            )));
        }
        if pi_hat.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("peak revenues must be finite and >= 0".into()));
        }
        if min_dist.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidArgument("minimum distances must be >= 0".into()));
        }
        let tau = min_dist
            .iter()
            .map(|&d| if d.is_infinite() { f64::INFINITY } else { 0.5 * alpha * d })
            .collect();
        Ok(LinPInputs {
            p_hat,
            pi_hat,
            beta,
            min_dist,
            tau,
            support,
            alpha,
        })
    }

    /// Builds the inputs from a full market, returning the unconstrained
    /// solution alongside.
    pub fn from_market(market: &Market, alpha: f64) -> Result<(Self, FpSolution)> {
        let fp = optimal_fp(market);
        let inputs = Self::new(
            fp.prices.0.clone(),
            fp.revenues.clone(),
            market.betas(),
            market.min_distances().to_vec(),
            market.support(),
            alpha,
        )?;
        Ok((inputs, fp))
    }

    pub fn len(&self) -> usize {
        self.p_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hat.is_empty()
    }
}

/// Two-piece linear minorant of a concave revenue curve peaking at
/// `(p_hat, pi_hat)` and vanishing at both support ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearLowerBound {
    pub p_hat: f64,
    pub pi_hat: f64,
    pub support: Support,
}

pub fn linear_lower_bound(p_hat: f64, pi_hat: f64, support: Support) -> LinearLowerBound {
    LinearLowerBound {
        p_hat,
        pi_hat,
        support,
    }
}

impl LinearLowerBound {
    /// A peak on a support end collapses that side: the curve is then the
    /// single line from the peak to the opposite end.
    pub fn eval(&self, p: f64) -> f64 {
        let Support { lo, hi } = self.support;
        if p < lo || p > hi {
            return 0.0;
        }
        if p <= self.p_hat && self.p_hat > lo {
            self.pi_hat * (p - lo) / (self.p_hat - lo)
        } else if p >= self.p_hat && self.p_hat < hi {
            self.pi_hat * (hi - p) / (hi - self.p_hat)
        } else {
            self.pi_hat
        }
    }
}

/// Price and guaranteed revenue share for one segment at pivot `m`.
#[inline]
fn clamp_rule(p_hat: f64, tau: f64, m: f64, support: Support) -> (f64, f64) {
    let Support { lo, hi } = support;
    if p_hat - m >= tau {
        let gamma = if p_hat > lo {
            (((m - lo) + tau) / (p_hat - lo)).min(1.0)
        } else {
            1.0
        };
        (m + tau, gamma)
    } else if m - p_hat >= tau {
        let gamma = if hi > p_hat {
            (((hi - m) + tau) / (hi - p_hat)).min(1.0)
        } else {
            1.0
        };
        (m - tau, gamma)
    } else {
        (p_hat, 1.0)
    }
}

/// Clamped prices and their revenue shares `gamma_i` at pivot `m`.
pub fn linp_prices(inputs: &LinPInputs, m: f64) -> (PriceVector, Vec<f64>) {
    let (prices, gammas) = inputs
        .p_hat
        .iter()
        .zip(&inputs.tau)
        .map(|(&p, &t)| clamp_rule(p, t, m, inputs.support))
        .unzip();
    (PriceVector(prices), gammas)
}

/// Lower bound `sum_i beta_i * gamma_i * pi_hat_i` on the revenue of the
/// clamped prices at pivot `m`.
pub fn pivot_objective(inputs: &LinPInputs, m: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..inputs.len() {
        let (_, gamma) = clamp_rule(inputs.p_hat[i], inputs.tau[i], m, inputs.support);
        total += inputs.beta[i] * gamma * inputs.pi_hat[i];
    }
    total
}

/// Objective at up to three pivots in one pass over the segments.
fn pivot_objective_3(inputs: &LinPInputs, ms: [Option<f64>; 3]) -> [f64; 3] {
    let mut totals = [0.0; 3];
    for i in 0..inputs.len() {
        for (slot, m) in ms.iter().enumerate() {
            if let Some(m) = m {
                let (_, gamma) = clamp_rule(inputs.p_hat[i], inputs.tau[i], *m, inputs.support);
                totals[slot] += inputs.beta[i] * gamma * inputs.pi_hat[i];
            }
        }
    }
    for (slot, m) in ms.iter().enumerate() {
        if m.is_none() {
            totals[slot] = f64::NEG_INFINITY;
        }
    }
    totals
}

/// Breakpoints `{p_hat_i ± tau_i}` strictly inside the support, plus both
/// support ends; sorted, with points that coincide up to rounding merged
/// into the lowest of them.
pub fn critical_points(inputs: &LinPInputs) -> Vec<f64> {
    let Support { lo, hi } = inputs.support;
    let delta = tol::PIVOT_MERGE * lo.abs().max(hi.abs());
    let mut points = Vec::with_capacity(2 * inputs.len() + 2);
    points.push(lo);
    points.push(hi);
    for (p, t) in inputs.p_hat.iter().zip(&inputs.tau) {
        for c in [p - t, p + t] {
            if c > lo + delta && c < hi - delta {
                points.push(c);
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|c, kept| *c - *kept <= delta);
    points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinPSolution {
    pub pivot: f64,
    pub prices: PriceVector,
    pub gammas: Vec<f64>,
    /// Certified lower bound on the revenue of `prices`.
    pub lower_bound: f64,
    pub critical_points: Vec<f64>,
    /// Objective sweeps performed; each evaluates up to three pivots in a
    /// single `O(K)` pass.
    pub probes: usize,
}

/// Optimal pivot by binary search over the sorted critical points.
///
/// A probe at index `z` evaluates `z - 1`, `z`, `z + 1` (missing neighbours
/// count as `-inf`). It moves right on a strict increase, left on a strict
/// decrease, and stops otherwise. From the stop the search walks outward
/// while neighbours stay within rounding noise of the current value, which
/// covers flat stretches and keeps near-equal neighbours from faking a
/// peak. The pivot reported is the lowest point attaining the largest value
/// seen.
pub fn opt_linp_ffp(inputs: &LinPInputs) -> LinPSolution {
    let points = critical_points(inputs);
    let n = points.len();
    let at = |idx: isize| -> Option<f64> {
        (idx >= 0 && (idx as usize) < n).then(|| points[idx as usize])
    };
    let single = |idx: usize| pivot_objective_3(inputs, [Some(points[idx]), None, None])[0];
    let mut probes = 0usize;
    let mut seen: Option<(usize, f64)> = None;
    let note = |z: usize, v: f64, seen: &mut Option<(usize, f64)>| {
        if seen.is_none_or(|(bz, bv)| v > bv || (v == bv && z < bz)) {
            *seen = Some((z, v));
        }
    };
    let mut stop: Option<(usize, f64, f64, f64)> = None;
    let (mut l, mut r) = (0isize, n as isize - 1);
    while l <= r {
        let z = (l + r) / 2;
        probes += 1;
        let [left, mid, right] = pivot_objective_3(inputs, [at(z - 1), at(z), at(z + 1)]);
        note(z as usize, mid, &mut seen);
        if right > mid {
            l = z + 1;
        } else if left > mid {
            r = z - 1;
        } else {
            stop = Some((z as usize, left, mid, right));
            break;
        }
    }
    // Summation noise grows with the number of terms.
    let noise = |v: f64| 4.0 * inputs.len() as f64 * f64::EPSILON * v.abs();
    let (z0, v0, mut left, mut right) = match stop {
        Some((z, left, mid, right)) => (z, mid, Some(left), Some(right)),
        None => {
            let (z, v) = seen.expect("at least one probe");
            (z, v, None, None)
        }
    };
    let (mut z, mut v) = (z0, v0);
    while z > 0 {
        let lv = left.take().unwrap_or_else(|| {
            probes += 1;
            single(z - 1)
        });
        if lv < v - noise(v) {
            break;
        }
        z -= 1;
        v = lv;
        note(z, v, &mut seen);
    }
    let (mut z, mut v) = (z0, v0);
    while z + 1 < n {
        let rv = right.take().unwrap_or_else(|| {
            probes += 1;
            single(z + 1)
        });
        if rv < v - noise(v) {
            break;
        }
        z += 1;
        v = rv;
        note(z, v, &mut seen);
    }
    let (z, value) = seen.expect("at least one probe");
    let pivot = points[z];
    let (prices, gammas) = linp_prices(inputs, pivot);
    LinPSolution {
        pivot,
        prices,
        gammas,
        lower_bound: value,
        critical_points: points,
        probes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::oracle_pivot_scan;
    use crate::revenue::is_alpha_fair;
    use proptest::prelude::*;

    const UNIT: Support = Support { lo: 0.0, hi: 1.0 };

    fn plateau_instance() -> LinPInputs {
        LinPInputs::new(
            vec![0.1, 0.9],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
            UNIT,
            0.4,
        )
        .unwrap()
    }

    #[test]
    fn lower_bound_examples() {
        let l = linear_lower_bound(0.5, 0.25, UNIT);
        assert_eq!(l.eval(0.25), 0.125);
        assert_eq!(l.eval(0.5), 0.25);
        assert_eq!(l.eval(0.0), 0.0);
        assert_eq!(l.eval(1.0), 0.0);
        for k in 0..=1000 {
            let p = k as f64 / 1000.0;
            assert!(l.eval(p) <= p * (1.0 - p) + 1e-15);
        }
        let left = linear_lower_bound(0.0, 0.3, UNIT);
        assert_eq!(left.eval(0.0), 0.3);
        assert!((left.eval(0.5) - 0.15).abs() < 1e-15);
        let right = linear_lower_bound(1.0, 0.3, UNIT);
        assert_eq!(right.eval(1.0), 0.3);
        assert!((right.eval(0.5) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn prices_examples() {
        let inputs = LinPInputs::new(
            vec![0.1, 0.9],
            vec![0.1, 0.1],
            vec![0.5, 0.5],
            vec![0.4, 0.4],
            UNIT,
            1.0,
        )
        .unwrap();
        let (p, _) = linp_prices(&inputs, 0.5);
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);
        let (p, g) = linp_prices(&inputs, 0.25);
        assert_eq!(p[0], 0.1);
        assert_eq!(g[0], 1.0);
        let (p, g) = linp_prices(&inputs, 0.1);
        assert_eq!(p[0], 0.1);
        assert_eq!(g[0], 1.0);
        let same = LinPInputs::new(vec![0.4, 0.4], vec![0.1, 0.1], vec![0.5, 0.5], vec![0.0, 0.0], UNIT, 1.0)
            .unwrap();
        assert_eq!(linp_prices(&same, 0.4).0 .0, vec![0.4, 0.4]);
    }

    #[test]
    fn objective_examples() {
        let inputs = plateau_instance();
        let expected = 0.25 * (0.7 / 0.9) + 0.25 * (0.7 / 0.9);
        assert!((pivot_objective(&inputs, 0.5) - expected).abs() < 1e-12);
        let (_, g) = linp_prices(&inputs, 0.3);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[1] - 0.5 / 0.9).abs() < 1e-12);
        assert!((pivot_objective(&inputs, 0.3) - 0.388_888_888_888_888_9).abs() < 1e-12);
        let wide = LinPInputs::new(vec![0.1, 0.9], vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], UNIT, 2.0).unwrap();
        assert_eq!(pivot_objective(&wide, 0.5), 0.5);
    }

    #[test]
    fn critical_point_examples() {
        let m = critical_points(&plateau_instance());
        assert_eq!(m.len(), 4);
        assert_eq!(m[0], 0.0);
        assert!((m[1] - 0.3).abs() < 1e-15 && (m[2] - 0.7).abs() < 1e-15);
        assert_eq!(m[3], 1.0);
        let zero = LinPInputs::new(vec![0.2, 0.6], vec![0.1, 0.1], vec![0.5, 0.5], vec![1.0, 1.0], UNIT, 0.0).unwrap();
        assert_eq!(critical_points(&zero), vec![0.0, 0.2, 0.6, 1.0]);
        let far = LinPInputs::new(vec![0.2, 0.6], vec![0.1, 0.1], vec![0.5, 0.5], vec![1.0, 1.0], UNIT, 4.0).unwrap();
        assert_eq!(critical_points(&far), vec![0.0, 1.0]);
    }

    #[test]
    fn plateau_reports_lowest_pivot() {
        let sol = opt_linp_ffp(&plateau_instance());
        assert!((sol.lower_bound - 0.388_888_888_888_888_9).abs() < 1e-12);
        assert!((sol.pivot - 0.3).abs() < 1e-12, "{}", sol.pivot);
        assert_eq!(sol.lower_bound, oracle_pivot_scan(&plateau_instance()).1);
    }

    #[test]
    fn single_segment_is_unconstrained() {
        let inputs = LinPInputs::new(vec![0.7], vec![0.2], vec![1.0], vec![f64::INFINITY], UNIT, 0.0).unwrap();
        let sol = opt_linp_ffp(&inputs);
        assert_eq!(sol.prices.0, vec![0.7]);
        assert_eq!(sol.gammas, vec![1.0]);
        assert_eq!(sol.lower_bound, 0.2);
    }

    #[test]
    fn symmetric_instance_matches_midpoint() {
        let inputs = LinPInputs::new(
            vec![0.15, 0.85, 0.3, 0.7],
            vec![0.2, 0.2, 0.1, 0.1],
            vec![0.25; 4],
            vec![0.3, 0.3, 0.2, 0.2],
            UNIT,
            0.5,
        )
        .unwrap();
        let sol = opt_linp_ffp(&inputs);
        assert!((sol.lower_bound - pivot_objective(&inputs, 0.5)).abs() < 1e-12);
        assert_eq!(sol.lower_bound, oracle_pivot_scan(&inputs).1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LinPInputs::new(vec![1.5], vec![0.1], vec![1.0], vec![1.0], UNIT, 1.0).is_err());
        assert!(LinPInputs::new(vec![0.5], vec![0.1, 0.2], vec![1.0], vec![1.0], UNIT, 1.0).is_err());
        assert!(LinPInputs::new(vec![0.5], vec![0.1], vec![1.0], vec![1.0], UNIT, -1.0).is_err());
    }

    fn instance() -> impl Strategy<Value = (LinPInputs, Vec<Vec<f64>>)> {
        (2usize..12)
            .prop_flat_map(|k| {
                (
                    prop::collection::vec(0.0f64..1.0, k),
                    prop::collection::vec(0.0f64..0.5, k),
                    prop::collection::vec(0.05f64..1.0, k),
                    prop::collection::vec(-3.0f64..3.0, k),
                    0.0f64..2.0,
                )
            })
            .prop_map(|(p, r, b, x, alpha)| {
                let k = p.len();
                let d: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| (x[i] - x[j]).abs()).collect()).collect();
                let dm = crate::market::min_distances(&d).unwrap();
                (LinPInputs::new(p, r, b, dm, UNIT, alpha).unwrap(), d)
            })
    }

    proptest! {
        #[test]
        fn clamped_prices_are_always_fair((inputs, d) in instance(), m in 0.0f64..1.0) {
            let (p, _) = linp_prices(&inputs, m);
            prop_assert!(is_alpha_fair(&p, &d, inputs.alpha).fair);
        }

        #[test]
        fn objective_is_unimodal_on_critical_points((inputs, _) in instance()) {
            let vals: Vec<f64> = critical_points(&inputs).iter().map(|&m| pivot_objective(&inputs, m)).collect();
            let peak = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let top = vals.iter().position(|v| *v == peak).unwrap();
            for w in vals[..=top].windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for w in vals[top..].windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn binary_search_matches_scan((inputs, _) in instance()) {
            let sol = opt_linp_ffp(&inputs);
            let (_, v) = oracle_pivot_scan(&inputs);
            prop_assert_eq!(sol.lower_bound, v);
            prop_assert!(sol.lower_bound >= pivot_objective(&inputs, 0.5));
            prop_assert!(sol.gammas.iter().all(|g| (0.0..=1.0).contains(g)));
        }
    }
}
