#![allow(dead_code)]

use fairprice::{LinPInputs, Market, MarketSpec, Metric, SegmentSpec, Support, ValuationSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn betas(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut b: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // Put the rounding remainder on the last weight so the sum is 1 to an ulp.
    let head: f64 = b[..k - 1].iter().sum();
    b[k - 1] = 1.0 - head;
    b
}

/// A concave-revenue family valid on `support`.
pub fn random_family(rng: &mut ChaCha8Rng, support: Support) -> ValuationSpec {
    let Support { lo, hi } = support;
    let w = hi - lo;
    let choices = if lo == 0.0 { 5 } else { 4 };
    match rng.random_range(0..choices) {
        0 => ValuationSpec::Uniform,
        1 => ValuationSpec::Power {
            exponent: rng.random_range(1.0..5.0),
        },
        2 => ValuationSpec::TruncExp {
            rate: rng.random_range(0.05..1.9) / hi,
        },
        3 => {
            // Convex CDF (non-decreasing density) keeps revenue concave.
            let n = rng.random_range(2..7);
            let k: f64 = rng.random_range(1.0..3.0);
            let knots = (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    let p = if i == n { hi } else { lo + w * t };
                    [p, t.powf(k)]
                })
                .collect();
            ValuationSpec::EmpiricalCdf { knots }
        }
        _ => {
            let peak_price = rng.random_range(0.02..0.98) * hi;
            ValuationSpec::TriangleRevenue {
                peak_price,
                peak_revenue: peak_price * rng.random_range(0.05..1.0),
            }
        }
    }
}

fn random_metric(rng: &mut ChaCha8Rng, k: usize) -> (Vec<Vec<f64>>, Metric) {
    let dim = rng.random_range(1..4);
    let scale = rng.random_range(0.2..3.0);
    let features: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| scale * rng.random::<f64>()).collect())
        .collect();
    if rng.random_bool(0.3) {
        let d = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| features[i].iter().zip(&features[j]).map(|(a, b)| (a - b).abs()).sum())
                    .collect()
            })
            .collect();
        (features, Metric::Matrix { d })
    } else {
        (features, Metric::Euclidean)
    }
}

pub fn random_support(rng: &mut ChaCha8Rng) -> Support {
    let lo = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) };
    Support {
        lo,
        hi: lo + rng.random_range(0.5..3.0),
    }
}

/// Continuous market with `k_min..=k_max` segments.
pub fn random_continuous_market(rng: &mut ChaCha8Rng, k_min: usize, k_max: usize) -> Market {
    loop {
        let k = rng.random_range(k_min..=k_max);
        let support = random_support(rng);
        let (features, metric) = random_metric(rng, k);
        let b = betas(rng, k);
        let segments = features
            .into_iter()
            .zip(b)
            .map(|(feature, beta)| SegmentSpec {
                feature,
                beta,
                valuation: random_family(rng, support),
            })
            .collect();
        if let Ok(m) = Market::from_spec(MarketSpec {
            support,
            metric,
            segments,
        }) {
            return m;
        }
    }
}

/// Alpha spread so that `alpha * min D / width` covers the slack, binding
/// and saturated regimes.
pub fn random_alpha(rng: &mut ChaCha8Rng, market: &Market) -> f64 {
    let d_min = market.min_distances().iter().copied().fold(f64::INFINITY, f64::min);
    if !d_min.is_finite() || d_min == 0.0 {
        return rng.random_range(0.0..2.0);
    }
    let ratio = match rng.random_range(0..10) {
        0 => 0.0,
        1 => rng.random_range(1.0..2.0),
        _ => rng.random_range(0.0..1.0),
    };
    ratio * market.support().width() / d_min
}

/// Two-segment discrete market with `1..=n_max` shared valuations. Half the
/// instances use integer valuations and tenth-step probabilities so that
/// revenue ties are common.
pub fn random_discrete_market(rng: &mut ChaCha8Rng, k: usize, n_max: usize) -> (Market, f64) {
    loop {
        let n = rng.random_range(1..=n_max);
        let coarse = rng.random_bool(0.5);
        let mut values: Vec<f64> = if coarse {
            let mut pool: Vec<f64> = (1..=10).map(f64::from).collect();
            for i in (1..pool.len()).rev() {
                pool.swap(i, rng.random_range(0..=i));
            }
            pool.truncate(n);
            pool
        } else {
            (0..n).map(|_| rng.random_range(0.1..10.0)).collect()
        };
        values.sort_by(f64::total_cmp);
        values.dedup();
        let probs = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            if coarse {
                let mut ticks = vec![0u32; values.len()];
                for _ in 0..10 {
                    ticks[rng.random_range(0..values.len())] += 1;
                }
                ticks.iter().map(|&t| f64::from(t) / 10.0).collect()
            } else {
                let raw: Vec<f64> = values.iter().map(|_| rng.random::<f64>() + 0.01).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            }
        };
        let b = betas(rng, k);
        let segments = (0..k)
            .map(|i| SegmentSpec {
                feature: vec![if coarse { f64::from(rng.random_range(0..4u8)) } else { rng.random_range(0.0..3.0) }],
                beta: b[i],
                valuation: ValuationSpec::Discrete {
                    values: values.clone(),
                    probs: probs(rng),
                },
            })
            .collect();
        let spec = MarketSpec {
            support: Support { lo: 0.0, hi: 10.0 },
            metric: Metric::Euclidean,
            segments,
        };
        if let Ok(m) = Market::from_spec(spec) {
            let alpha = if coarse {
                f64::from(rng.random_range(0..12u8)) * 0.25
            } else {
                rng.random_range(0.0..4.0)
            };
            return (m, alpha);
        }
    }
}

/// Pivot-search inputs with `k` segments on 1-D features. Prices and radii
/// are sometimes snapped to a coarse grid to create coinciding critical
/// points and plateaus.
pub fn random_linp_inputs(rng: &mut ChaCha8Rng, k: usize) -> LinPInputs {
    let support = random_support(rng);
    let snap = rng.random_bool(0.4);
    let w = support.width();
    let q = |x: f64| if snap { (x * 20.0).round() / 20.0 } else { x };
    let p_hat: Vec<f64> = (0..k).map(|_| support.lo + w * q(rng.random::<f64>())).collect();
    let pi_hat: Vec<f64> = p_hat.iter().map(|p| p * rng.random_range(0.05..1.0)).collect();
    let beta = betas(rng, k);
    let xs: Vec<f64> = (0..k).map(|_| q(rng.random::<f64>()) * 4.0).collect();
    let min_dist = if k == 1 {
        vec![f64::INFINITY]
    } else {
        fairprice::market::min_distances_1d(&xs).unwrap()
    };
    let alpha = if snap { q(rng.random::<f64>()) } else { rng.random_range(0.0..2.0) } * w;
    LinPInputs::new(p_hat, pi_hat, beta, min_dist, support, alpha).unwrap()
}
