//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line before asserting.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use fairprice::oracles::{oracle_discrete_ffp, oracle_grid_convex, oracle_pivot_scan};
use fairprice::{
    cof_bound, cof_case_formula, is_alpha_fair, linp_prices, opt_linp_ffp, optimize_fair_convex, solve_ffp_convex,
    solve_ffp_discrete, solve_linp, ConvexSolveConfig, Exec, LinPInputs, Market, MarketSpec, Metric, SegmentSpec,
    Support, Valuation, ValuationSpec,
};
use rand::Rng;

fn report(n: u32, ok: bool, summary: &str) {
    // Written to the raw handle so the line shows without `--nocapture`.
    let _ = writeln!(std::io::stderr(), "{} criterion {n}: {summary}", if ok { "PASS" } else { "FAIL" });
}

fn tight_market(eps: f64, d12: f64) -> Market {
    let seg = |peak: f64, x: f64| SegmentSpec {
        feature: vec![x],
        beta: 0.5,
        valuation: ValuationSpec::TriangleRevenue {
            peak_price: peak,
            peak_revenue: 0.5 * eps,
        },
    };
    Market::from_spec(MarketSpec {
        support: Support { lo: 0.0, hi: 1.0 },
        metric: Metric::Euclidean,
        segments: vec![seg(eps, 0.0), seg(1.0 - eps, d12)],
    })
    .unwrap()
}

#[test]
fn criterion_01_tightness_example() {
    let start = Instant::now();
    let market = tight_market(1e-4, 1.0);
    let cfg = ConvexSolveConfig::default();
    let mut worst_rel: f64 = 0.0;
    let mut worst_unit: f64 = 0.0;
    for a in [0.1, 0.4, 0.8] {
        let r = solve_ffp_convex(&market, a, &cfg).unwrap();
        let expected = 2.0 / (1.0 + a);
        worst_rel = worst_rel.max((r.cof.unwrap() / expected - 1.0).abs());
        assert!(r.fairness.fair);
    }
    for a in [1.0, 1.5, 10.0] {
        let r = solve_ffp_convex(&market, a, &cfg).unwrap();
        worst_unit = worst_unit.max((r.cof.unwrap() - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst_rel < 1e-3 && worst_unit < 1e-9 && elapsed < Duration::from_secs(1);
    report(
        1,
        ok,
        &format!("max rel err {worst_rel:.2e} (binding), max |cof-1| {worst_unit:.2e} (slack), {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_worst_case_bound_for_linp() {
    let start = Instant::now();
    let mut rng = common::rng(2);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let market = common::random_continuous_market(&mut rng, 2, 8);
        let alpha = common::random_alpha(&mut rng, &market);
        let r = solve_linp(&market, alpha).unwrap();
        assert!(r.fairness.fair);
        worst = worst.max(r.cof.unwrap() - r.cof_bound);
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-9 && elapsed < Duration::from_secs(30);
    report(2, ok, &format!("max(cof - bound) = {worst:.3e} over 1000 markets, {elapsed:.2?}"));
    assert!(ok);
}

#[test]
fn criterion_03_alpha_zero_recovers_two() {
    let exact = [
        cof_bound(0.0, &[1.0, 2.0], Support { lo: 0.0, hi: 1.0 }),
        cof_bound(0.0, &[1e-9], Support { lo: 3.0, hi: 70.0 }),
        cof_bound(0.0, &[5.0, 5.0, 5.0], Support { lo: 0.0, hi: 1e-3 }),
    ];
    let mut rng = common::rng(2);
    let cfg = ConvexSolveConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let market = common::random_continuous_market(&mut rng, 2, 8);
        let _ = common::random_alpha(&mut rng, &market);
        let linp = solve_linp(&market, 0.0).unwrap();
        let convex = solve_ffp_convex(&market, 0.0, &cfg).unwrap();
        assert_eq!(linp.cof_bound, 2.0);
        worst = worst.max(linp.cof.unwrap()).max(convex.cof.unwrap());
    }
    let ok = exact.iter().all(|b| *b == 2.0) && worst <= 2.0;
    report(3, ok, &format!("bound(0) = 2 exactly; max cof at alpha = 0 is {worst:.6}"));
    assert!(ok);
}

#[test]
fn criterion_04_case_formula_limit() {
    let mut worst: f64 = 0.0;
    for (v2, a) in [(1.0, 0.1), (10.0, 0.5), (100.0, 2.0)] {
        let c = cof_case_formula(0.5, 0.0, 0.3, 1e-9 * v2, v2, a).unwrap();
        worst = worst.max((c.case3().unwrap() / (v2 / a) - 1.0).abs());
    }
    let ok = worst < 1e-4;
    report(4, ok, &format!("max rel err vs v2/(alpha d12) = {worst:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_05_discrete_solver_exact() {
    let start = Instant::now();
    let mut rng = common::rng(5);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (market, alpha) = common::random_discrete_market(&mut rng, 2, 6);
        let r = solve_ffp_discrete(&market, alpha).unwrap();
        let o = oracle_discrete_ffp(&market, alpha).unwrap();
        assert!(r.fairness.fair);
        if r.ffp_revenue != Some(o.revenue) {
            mismatches += 1;
            eprintln!("mismatch: {:?} vs {:?} at alpha {alpha}", r.ffp_prices, o);
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(10);
    report(5, ok, &format!("{mismatches} mismatches in 1000 instances, {elapsed:.2?}"));
    assert!(ok);
}

#[test]
fn criterion_06_pivot_search_exact() {
    let mut rng = common::rng(6);
    let instances: Vec<LinPInputs> = (0..1000)
        .map(|_| {
            let k = rng.random_range(1..=64);
            common::random_linp_inputs(&mut rng, k)
        })
        .collect();
    let start = Instant::now();
    let mut mismatches = 0;
    for inputs in &instances {
        let sol = opt_linp_ffp(inputs);
        if sol.lower_bound != oracle_pivot_scan(inputs).1 {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(5);
    report(6, ok, &format!("{mismatches} mismatches in 1000 instances, {elapsed:.2?}"));
    assert!(ok);
}

#[test]
fn criterion_07_pivot_search_scales() {
    let k = 100_000;
    let mut rng = common::rng(7);
    let inputs = common::random_linp_inputs(&mut rng, k);
    let start = Instant::now();
    let sol = opt_linp_ffp(&inputs);
    let elapsed = start.elapsed();
    let limit = ((2 * k + 2) as f64).log2().ceil() as usize + 1;
    let ok = elapsed < Duration::from_secs(1) && sol.probes <= limit;
    report(
        7,
        ok,
        &format!("K = {k}: {elapsed:.2?}, {} probes (limit {limit})", sol.probes),
    );
    assert!(ok);
}

#[test]
fn criterion_08_per_segment_guarantee() {
    let mut rng = common::rng(8);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..500 {
        let market = common::random_continuous_market(&mut rng, 2, 5);
        let alpha = common::random_alpha(&mut rng, &market);
        let (inputs, fp) = LinPInputs::from_market(&market, alpha).unwrap();
        let s = market.support();
        let m = rng.random_range(s.lo..=s.hi);
        let (p, gammas) = linp_prices(&inputs, m);
        for (i, seg) in market.segments().iter().enumerate() {
            let Valuation::Continuous(v) = &seg.valuation else { unreachable!() };
            worst = worst.max(gammas[i] * fp.revenues[i] - v.revenue(p[i]));
        }
    }
    let ok = worst <= 1e-9;
    report(8, ok, &format!("max(gamma pi_hat - pi(p)) = {worst:.3e} over 500 draws"));
    assert!(ok);
}

#[test]
fn criterion_09_clamped_prices_are_fair() {
    let mut rng = common::rng(9);
    let mut violations = 0;
    let mut draws = 0;
    while draws < 10_000 {
        let market = common::random_continuous_market(&mut rng, 2, 8);
        let alpha = common::random_alpha(&mut rng, &market);
        let (inputs, _) = LinPInputs::from_market(&market, alpha).unwrap();
        let s = market.support();
        for _ in 0..20 {
            let m = rng.random_range(s.lo..=s.hi);
            let (p, _) = linp_prices(&inputs, m);
            if !is_alpha_fair(&p, market.distances(), alpha).fair {
                violations += 1;
            }
            draws += 1;
        }
    }
    let ok = violations == 0;
    report(9, ok, &format!("{violations} violations in {draws} draws"));
    assert!(ok);
}

#[test]
fn criterion_10_convex_solver_optimality() {
    let mut rng = common::rng(10);
    let cfg = ConvexSolveConfig::default();
    let mut worst_grid: f64 = f64::NEG_INFINITY;
    let mut worst_linp: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let market = common::random_continuous_market(&mut rng, 2, 3);
        let alpha = common::random_alpha(&mut rng, &market);
        let sol = optimize_fair_convex(&market, alpha, &cfg).unwrap();
        assert!(is_alpha_fair(&sol.prices, market.distances(), alpha).fair);
        let grid = oracle_grid_convex(&market, alpha, 1e-4, Exec::default()).unwrap();
        let linp = solve_linp(&market, alpha).unwrap().ffp_revenue.unwrap();
        worst_grid = worst_grid.max(grid.revenue - sol.revenue);
        worst_linp = worst_linp.max(linp - sol.revenue);
    }
    let ok = worst_grid <= 1e-3 && worst_linp <= 1e-9;
    report(
        10,
        ok,
        &format!("max(grid - solver) = {worst_grid:.3e}, max(linp - solver) = {worst_linp:.3e} over 200 markets"),
    );
    assert!(ok);
}
