//! Brute-force references for the solvers.
//!
//! Nothing here calls into `discrete`, `convex` or `linp` solver code; the
//! oracles only share the market and revenue data types. They are shipped in
//! the library so the CLI can run them against user instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linp::LinPInputs;
use crate::market::Market;
use crate::revenue::{is_alpha_fair, total_revenue, PriceVector};
use crate::valuation::ContinuousValuation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub prices: PriceVector,
    pub revenue: f64,
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Exhaustive search over fair price pairs drawn from
/// `{v_i} ∪ {v_i ± alpha d_12}` (clipped at zero) for two-segment discrete
/// markets. Ties go to the lexicographically lower pair.
pub fn oracle_discrete_ffp(market: &Market, alpha: f64) -> Result<OracleResult> {
    let values = market
        .value_set()
        .ok_or_else(|| Error::OracleInapplicable("market is not discrete".into()))?;
    if market.len() != 2 {
        return Err(Error::OracleInapplicable(format!(
            "discrete oracle needs exactly 2 segments, got {}",
            market.len()
        )));
    }
    let offset = alpha * market.distances()[0][1];
    let mut grid: Vec<f64> = values
        .iter()
        .flat_map(|&v| [v, v + offset, (v - offset).max(0.0)])
        .filter(|p| p.is_finite())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut best: Option<OracleResult> = None;
    for &p1 in &grid {
        for &p2 in &grid {
            let pair = [p1, p2];
            if !is_alpha_fair(&pair, market.distances(), alpha).fair {
                continue;
            }
            let revenue = total_revenue(market, &pair)?;
            let better = match &best {
                None => true,
                Some(b) => revenue > b.revenue || (revenue == b.revenue && lex_less(&pair, &b.prices)),
            };
            if better {
                best = Some(OracleResult {
                    prices: PriceVector(pair.to_vec()),
                    revenue,
                });
            }
        }
    }
    Ok(best.expect("uniform pairs are always fair"))
}

/// Largest `K` the grid oracle accepts.
pub const GRID_ORACLE_MAX_SEGMENTS: usize = 3;

/// Best fair price vector on the grid `lo + t * resolution * (hi - lo)`.
///
/// The result equals a literal scan of every fair grid vector. The last
/// coordinate's inner maximum is taken with a monotone sliding window, so a
/// `K = 3` scan costs `O(n^2)` rather than `O(n^3)`.
pub fn oracle_grid_convex(
    market: &Market,
    alpha: f64,
    resolution: f64,
    exec: Exec,
) -> Result<OracleResult> {
    let k = market.len();
    if market.is_discrete() {
        return Err(Error::OracleInapplicable("grid oracle needs a continuous market".into()));
    }
    if k > GRID_ORACLE_MAX_SEGMENTS {
        return Err(Error::OracleInapplicable(format!(
            "grid oracle supports at most {GRID_ORACLE_MAX_SEGMENTS} segments, got {k}"
        )));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid resolution {resolution} not in (0, 1]")));
    }
    let support = market.support();
    let n = (1.0 / resolution).round().max(1.0) as usize;
    let h = support.width() / n as f64;
    let price = |t: usize| {
        if t == n {
            support.hi
        } else {
            support.lo + support.width() * t as f64 / n as f64
        }
    };
    let weighted: Vec<Vec<f64>> = market
        .segments()
        .iter()
        .map(|s| (0..=n).map(|t| s.beta * s.revenue(price(t))).collect())
        .collect();
    let d = market.distances();
    // Largest index offset whose price gap stays within alpha * d.
    let reach = |i: usize, j: usize| -> usize {
        let a = alpha * d[i][j];
        ((a / h) + 1e-6).floor().min(n as f64) as usize
    };

    let idx: Vec<usize> = match k {
        1 => vec![argmax(&weighted[0], 0, n).0],
        2 => {
            let o = reach(0, 1);
            let table = SparseMax::new(&weighted[1]);
            let rows = exec.map_range(n + 1, |s| {
                let (t, v) = table.query(s.saturating_sub(o), (s + o).min(n));
                (weighted[0][s] + v, t)
            });
            let (s, (_, t)) = best_row(&rows);
            vec![s, t]
        }
        _ => {
            let (o12, o13, o23) = (reach(0, 1), reach(0, 2), reach(1, 2));
            let rows = exec.map_range(n + 1, |s| {
                row_max_3(s, n, (o12, o13, o23), &weighted[1], &weighted[2])
                    .map(|(v, j, t)| (weighted[0][s] + v, (j, t)))
                    .unwrap_or((f64::NEG_INFINITY, (s, s)))
            });
            let (s, (_, (j, t))) = best_row(&rows);
            vec![s, j, t]
        }
    };
    let prices: Vec<f64> = idx.into_iter().map(price).collect();
    let revenue = total_revenue(market, &prices)?;
    Ok(OracleResult {
        prices: PriceVector(prices),
        revenue,
    })
}

fn argmax(xs: &[f64], a: usize, b: usize) -> (usize, f64) {
    let mut best = (a, xs[a]);
    for (t, &x) in xs.iter().enumerate().take(b + 1).skip(a + 1) {
        if x > best.1 {
            best = (t, x);
        }
    }
    best
}

fn best_row<T: Copy>(rows: &[(f64, T)]) -> (usize, (f64, T)) {
    let mut best = (0, rows[0]);
    for (s, r) in rows.iter().enumerate().skip(1) {
        if r.0 > best.1 .0 {
            best = (s, *r);
        }
    }
    best
}

/// For a fixed first price index `s`, maximizes `w2[j] + w3[t]` over fair
/// `(j, t)`. Both window ends for `t` are non-decreasing in `j`.
fn row_max_3(
    s: usize,
    n: usize,
    (o12, o13, o23): (usize, usize, usize),
    w2: &[f64],
    w3: &[f64],
) -> Option<(f64, usize, usize)> {
    let j_lo = s.saturating_sub(o12);
    let j_hi = (s + o12).min(n);
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut next = 0usize;
    let mut best: Option<(f64, usize, usize)> = None;
    for j in j_lo..=j_hi {
        let t_lo = s.saturating_sub(o13).max(j.saturating_sub(o23));
        let t_hi = (s + o13).min(j + o23).min(n);
        if next < t_lo {
            next = t_lo;
        }
        while next <= t_hi {
            while deque.back().is_some_and(|&b| w3[b] < w3[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&f| f < t_lo) {
            deque.pop_front();
        }
        let Some(&t) = deque.front() else { continue };
        if t > t_hi {
            continue;
        }
        let v = w2[j] + w3[t];
        if best.is_none_or(|b| v > b.0) {
            best = Some((v, j, t));
        }
    }
    best
}

/// Range-maximum table; ties resolve to the lowest index.
struct SparseMax<'a> {
    xs: &'a [f64],
    levels: Vec<Vec<usize>>,
}

impl<'a> SparseMax<'a> {
    fn new(xs: &'a [f64]) -> Self {
        let mut levels = vec![(0..xs.len()).collect::<Vec<_>>()];
        let mut span = 1;
        while 2 * span <= xs.len() {
            let prev = levels.last().unwrap();
            let next = (0..=xs.len() - 2 * span)
                .map(|i| Self::pick(xs, prev[i], prev[i + span]))
                .collect();
            levels.push(next);
            span *= 2;
        }
        SparseMax { xs, levels }
    }

    fn pick(xs: &[f64], a: usize, b: usize) -> usize {
        if xs[b] > xs[a] || (xs[b] == xs[a] && b < a) {
            b
        } else {
            a
        }
    }

    fn query(&self, a: usize, b: usize) -> (usize, f64) {
        let len = b - a + 1;
        let level = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let i = Self::pick(self.xs, self.levels[level][a], self.levels[level][b + 1 - (1 << level)]);
        (i, self.xs[i])
    }
}

/// Evaluates the pivot objective at every critical point and returns the
/// best pivot (lowest on ties) with its value.
///
/// Reimplements the clamp rule and critical-point set with the same
/// floating-point expressions as the solver, so values compare exactly.
pub fn oracle_pivot_scan(inputs: &LinPInputs) -> (f64, f64) {
    let (lo, hi) = (inputs.support.lo, inputs.support.hi);
    let delta = crate::tol::PIVOT_MERGE * lo.abs().max(hi.abs());
    let mut raw = vec![lo, hi];
    for (p, t) in inputs.p_hat.iter().zip(&inputs.tau) {
        for c in [p - t, p + t] {
            if c > lo + delta && c < hi - delta {
                raw.push(c);
            }
        }
    }
    raw.sort_by(f64::total_cmp);
    let mut points: Vec<f64> = Vec::with_capacity(raw.len());
    for c in raw {
        match points.last() {
            Some(&last) if c - last <= delta => {}
            _ => points.push(c),
        }
    }

    let value = |m: f64| -> f64 {
        let mut total = 0.0;
        for i in 0..inputs.p_hat.len() {
            let (p, t) = (inputs.p_hat[i], inputs.tau[i]);
            let gamma = if p - m >= t {
                if p > lo {
                    (((m - lo) + t) / (p - lo)).min(1.0)
                } else {
                    1.0
                }
            } else if m - p >= t {
                if hi > p {
                    (((hi - m) + t) / (hi - p)).min(1.0)
                } else {
                    1.0
                }
            } else {
                1.0
            };
            total += inputs.beta[i] * gamma * inputs.pi_hat[i];
        }
        total
    };
    let mut best = (points[0], value(points[0]));
    for &m in &points[1..] {
        let v = value(m);
        if v > best.1 {
            best = (m, v);
        }
    }
    best
}

/// Monte Carlo estimate of `p * P(V >= p)` and its standard error.
/// Deterministic for a given seed regardless of the execution policy.
pub fn oracle_monte_carlo_revenue(
    valuation: &ContinuousValuation,
    price: f64,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> (f64, f64) {
    const CHUNK: usize = 1 << 16;
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = exec
        .map_range(chunks, |c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .filter(|_| valuation.quantile(rng.random::<f64>()) >= price)
                .count() as u64
        })
        .into_iter()
        .sum();
    let share = hits as f64 / samples as f64;
    let se = price * (share * (1.0 - share) / samples as f64).sqrt();
    (price * share, se)
}

/// Best revenue over random fair price vectors: uniform prices, plus vectors
/// clamped to radius `alpha * D_i / 2` around a random pivot (fair by the
/// triangle inequality). A cheap seeded spot check of solver optimality.
pub fn oracle_random_fair_probes(
    market: &Market,
    alpha: f64,
    probes: usize,
    seed: u64,
    exec: Exec,
) -> Result<OracleResult> {
    let support = market.support();
    let k = market.len();
    let results = exec.map_range(probes, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
        let m = support.lo + support.width() * rng.random::<f64>();
        let prices: Vec<f64> = if c % 2 == 0 {
            vec![m; k]
        } else {
            market
                .min_distances()
                .iter()
                .map(|&dm| {
                    let r = if dm.is_finite() { 0.5 * alpha * dm } else { support.width() };
                    support.clamp(m + r * (2.0 * rng.random::<f64>() - 1.0))
                })
                .collect()
        };
        prices
    });
    let mut best: Option<OracleResult> = None;
    for prices in results {
        if !is_alpha_fair(&prices, market.distances(), alpha).fair {
            continue;
        }
        let revenue = total_revenue(market, &prices)?;
        if best.as_ref().is_none_or(|b| revenue > b.revenue) {
            best = Some(OracleResult {
                prices: PriceVector(prices),
                revenue,
            });
        }
    }
    best.ok_or_else(|| Error::OracleInapplicable("no fair probe generated".into()))
}
