//! Command-line front end: solve, sweep alpha, check solvers against their
//! oracles, and print the worst-case cost of fairness.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairprice::oracles::{oracle_discrete_ffp, oracle_grid_convex, oracle_pivot_scan, oracle_random_fair_probes};
use fairprice::{
    cof_bound, linspace, opt_linp_ffp, optimize_fair_convex, solve, solve_ffp_discrete, sweep, ConvexSolveConfig,
    Error, Exec, LinPInputs, Market, SolveMethod, SolveReport, SweepRow,
};
use serde::Serialize;

pub const EXIT_DEVIATION: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_UNSUPPORTED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fairprice", version, about = "Revenue-optimal pricing under individual fairness")]
pub struct Cli {
    /// Worker threads for sweeps and oracle scans.
    #[arg(long, env = "FAIRPRICE_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fair prices, revenues and cost of fairness at one alpha.
    Solve(SolveArgs),
    /// One row per alpha in an evenly spaced range.
    Sweep(SweepArgs),
    /// Compare a solver with its brute-force oracle.
    Validate(ValidateArgs),
    /// Worst-case cost of fairness for the market's geometry.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Discrete,
    Convex,
    Linp,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => SolveMethod::Auto,
            MethodArg::Discrete => SolveMethod::Discrete,
            MethodArg::Convex => SolveMethod::Convex,
            MethodArg::Linp => SolveMethod::Linp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub market: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Include solver wall time (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub market: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_min: f64,
    #[arg(long)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub market: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Grid step for the convex oracle, relative to the support width.
    #[arg(long, default_value_t = 1e-4)]
    pub resolution: f64,
    /// Seed for the random fair-price probes run alongside the grid oracle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub probes: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub market: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl CliError {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        CliError {
            code,
            error: error.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidMarket(_)
            | Error::Parse(_)
            | Error::DimensionMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::SingleSegment
            | Error::InvalidArgument(_) => EXIT_INVALID,
            Error::UnsupportedShape(_) | Error::OracleInapplicable(_) => EXIT_UNSUPPORTED,
            Error::DivergentCof | Error::ProjectionDidNotConverge { .. } => EXIT_DEVIATION,
        };
        CliError::new(code, e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(EXIT_DEVIATION, e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new(EXIT_DEVIATION, e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new(EXIT_DEVIATION, e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_market(path: &PathBuf) -> CliResult<Market> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| CliError::new(EXIT_INVALID, e))?;
    Ok(Market::from_json(&text)?)
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")).into())
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed,
/// exponent form outside `[1e-4, 1e12)`.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_else(|| "inf".into())
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_g(*x)).collect::<Vec<_>>().join(";")
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn run_solve(args: &SolveArgs, out: &mut dyn Write) -> CliResult<()> {
    check_alpha(args.alpha)?;
    let market = load_market(&args.market)?;
    let report = solve(&market, args.alpha, args.method.into(), &ConvexSolveConfig::default())?;
    match args.format {
        Format::Json => {
            let mut value = serde_json::to_value(&report)?;
            if args.timing {
                value["wall_time_seconds"] = report.wall_time.as_secs_f64().into();
            }
            write_json(out, &value)
        }
        Format::Csv => write_report_csv(&report, args.timing, out),
    }
}

fn write_report_csv(r: &SolveReport, timing: bool, out: &mut dyn Write) -> CliResult<()> {
    let mut w = csv_writer(out);
    let mut header = vec![
        "method",
        "alpha",
        "fp_revenue",
        "ffp_revenue",
        "cof",
        "cof_bound",
        "fair",
        "fp_prices",
        "ffp_prices",
    ];
    let mut row = vec![
        r.method.as_str().to_string(),
        fmt_g(r.alpha),
        fmt_g(r.fp_revenue),
        r.ffp_revenue.map(fmt_g).unwrap_or_default(),
        fmt_opt(r.cof),
        fmt_g(r.cof_bound),
        r.fairness.fair.to_string(),
        fmt_list(&r.fp_prices),
        fmt_list(&r.ffp_prices),
    ];
    if timing {
        header.push("wall_time_seconds");
        row.push(fmt_g(r.wall_time.as_secs_f64()));
    }
    w.write_record(&header)?;
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

fn run_sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let alphas = linspace(args.alpha_min, args.alpha_max, args.steps)?;
    let market = load_market(&args.market)?;
    let rows = sweep(&market, &alphas, args.method.into(), &ConvexSolveConfig::default(), Exec::default())?;
    match args.format {
        Format::Json => write_json(out, &rows),
        Format::Csv => write_sweep_csv(&rows, out),
    }
}

fn write_sweep_csv(rows: &[SweepRow], out: &mut dyn Write) -> CliResult<()> {
    let mut w = csv_writer(out);
    w.write_record(["alpha", "fp_revenue", "ffp_revenue", "cof", "bound"])?;
    for r in rows {
        w.write_record([
            fmt_g(r.alpha),
            fmt_g(r.fp_revenue),
            fmt_g(r.ffp_revenue),
            fmt_opt(r.cof),
            fmt_g(r.bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    pub method: &'static str,
    pub oracle: &'static str,
    pub solver_value: f64,
    pub oracle_value: f64,
    /// How far the solver falls short of the oracle (zero if it does better).
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_value: Option<f64>,
}

impl ValidationOutcome {
    fn new(method: &'static str, oracle: &'static str, solver: f64, oracle_value: f64, tolerance: f64) -> Self {
        let deviation = (oracle_value - solver).max(0.0);
        ValidationOutcome {
            method,
            oracle,
            solver_value: solver,
            oracle_value,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
            probe_value: None,
        }
    }
}

/// Tolerance on `grid - solver` for the convex solver.
pub const GRID_TOLERANCE: f64 = 1e-3;

pub fn validate_market(
    market: &Market,
    alpha: f64,
    method: SolveMethod,
    resolution: f64,
    seed: u64,
    probes: usize,
) -> fairprice::Result<ValidationOutcome> {
    let method = match method {
        SolveMethod::Auto if market.is_discrete() && market.len() == 2 => SolveMethod::Discrete,
        SolveMethod::Auto if market.is_discrete() => SolveMethod::Linp,
        SolveMethod::Auto => SolveMethod::Convex,
        m => m,
    };
    match method {
        SolveMethod::Discrete => {
            let oracle = oracle_discrete_ffp(market, alpha)?;
            let r = solve_ffp_discrete(market, alpha)?;
            let solver = r.ffp_revenue.expect("full market");
            Ok(ValidationOutcome::new("discrete", "discrete-enumeration", solver, oracle.revenue, 0.0))
        }
        SolveMethod::Linp => {
            let (inputs, _) = LinPInputs::from_market(market, alpha)?;
            let sol = opt_linp_ffp(&inputs);
            let (_, scan) = oracle_pivot_scan(&inputs);
            Ok(ValidationOutcome::new("linp", "pivot-scan", sol.lower_bound, scan, 0.0))
        }
        SolveMethod::Convex | SolveMethod::Auto => {
            let grid = oracle_grid_convex(market, alpha, resolution, Exec::default())?;
            let sol = optimize_fair_convex(market, alpha, &ConvexSolveConfig::default())?;
            let mut outcome = ValidationOutcome::new("convex", "grid", sol.revenue, grid.revenue, GRID_TOLERANCE);
            if probes > 0 {
                let probe = oracle_random_fair_probes(market, alpha, probes, seed, Exec::default())?;
                outcome.probe_value = Some(probe.revenue);
                if probe.revenue > sol.revenue + GRID_TOLERANCE {
                    outcome.passed = false;
                }
            }
            Ok(outcome)
        }
    }
}

fn run_validate(args: &ValidateArgs, out: &mut dyn Write) -> CliResult<()> {
    check_alpha(args.alpha)?;
    let market = load_market(&args.market)?;
    let outcome = validate_market(&market, args.alpha, args.method.into(), args.resolution, args.seed, args.probes)?;
    match args.format {
        Format::Json => write_json(out, &outcome)?,
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(["method", "oracle", "solver_value", "oracle_value", "deviation", "tolerance", "passed"])?;
            w.write_record([
                outcome.method.to_string(),
                outcome.oracle.to_string(),
                fmt_g(outcome.solver_value),
                fmt_g(outcome.oracle_value),
                fmt_g(outcome.deviation),
                fmt_g(outcome.tolerance),
                outcome.passed.to_string(),
            ])?;
            w.flush()?;
        }
    }
    if outcome.passed {
        Ok(())
    } else {
        Err(CliError::new(
            EXIT_DEVIATION,
            anyhow::anyhow!(
                "solver is {:e} below the {} oracle (tolerance {:e})",
                outcome.deviation,
                outcome.oracle,
                outcome.tolerance
            ),
        ))
    }
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    alpha: f64,
    min_distance: f64,
    support_width: f64,
    bound: f64,
}

fn run_bound(args: &BoundArgs, out: &mut dyn Write) -> CliResult<()> {
    check_alpha(args.alpha)?;
    let market = load_market(&args.market)?;
    let min_distance = market.min_distances().iter().copied().fold(f64::INFINITY, f64::min);
    let b = BoundOutput {
        alpha: args.alpha,
        min_distance,
        support_width: market.support().width(),
        bound: cof_bound(args.alpha, market.min_distances(), market.support()),
    };
    match args.format {
        // JSON has no infinity; a lone segment reports a null distance.
        Format::Json => write_json(
            out,
            &serde_json::json!({
                "alpha": b.alpha,
                "min_distance": b.min_distance.is_finite().then_some(b.min_distance),
                "support_width": b.support_width,
                "bound": b.bound,
            }),
        ),
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(["alpha", "min_distance", "support_width", "bound"])?;
            w.write_record([fmt_g(b.alpha), fmt_g(b.min_distance), fmt_g(b.support_width), fmt_g(b.bound)])?;
            w.flush()?;
            Ok(())
        }
    }
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::new(EXIT_INVALID, anyhow::anyhow!("FAIRPRICE_THREADS must be >= 1")));
    }
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Solve(a) => run_solve(a, out),
        Command::Sweep(a) => run_sweep(a, out),
        Command::Validate(a) => run_validate(a, out),
        Command::Bound(a) => run_bound(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_g_matches_printf() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(0.25), "0.25");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(2.0 / 1.4), "1.42857142857");
        assert_eq!(fmt_g(123456.0), "123456");
        assert_eq!(fmt_g(1e-7), "1e-07");
        assert_eq!(fmt_g(1.5e13), "1.5e+13");
        assert_eq!(fmt_g(-0.00012), "-0.00012");
        assert_eq!(fmt_g(0.00005), "5e-05");
        assert_eq!(fmt_g(999999999999.5), "1e+12");
        assert_eq!(fmt_g(f64::INFINITY), "inf");
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "fairprice", "sweep", "--market", "m.json", "--alpha-max", "2", "--steps", "3",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Sweep(SweepArgs { steps: 3, .. })));
        assert!(Cli::try_parse_from(["fairprice", "solve", "--market", "m.json"]).is_err());
    }
}
