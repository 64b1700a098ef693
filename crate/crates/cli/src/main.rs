//! `reflection-hedge` command-line driver.
//!
//! Every command is deterministic for a fixed seed. CSV and JSON artifacts
//! carry the tool version in their header.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use reflection_hedge::config::{DensityConfig, ModelConfig, Setup};
use reflection_hedge::hedge::{self, HedgeReport, VERSION};
use reflection_hedge::market::sample_path;
use reflection_hedge::mc::{self, DEFAULT_SEED};
use reflection_hedge::{
    build_portfolio, generate_group, price_knockout_mc, put_call_symmetry_case, reflection, HedgePortfolio,
    KilledKernel, McConfig, PayoffSpec, QuadratureSpec,
};

#[derive(Parser)]
#[command(name = "reflection-hedge", version, about = "Semi-static hedging of knock-out options with cone barriers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo price of the knock-out claim, or of a replicating portfolio.
    Price(PriceArgs),
    /// Build the replicating portfolio and write it as JSON.
    Hedge(HedgeArgs),
    /// Price both sides of the hedge identity; exit 1 if they disagree.
    Verify(VerifyArgs),
    /// Killed transition density on a set of points.
    Density(DensityArgs),
    /// Survival probability of Brownian motion in the chamber.
    Survival(SurvivalArgs),
    /// One-asset reduction to put-call symmetry; exit 1 on failure.
    SymmetryCheck(SymmetryArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Payoff on the barrier index, e.g. `call:k=1,K=100` (k is one-based).
    #[arg(long)]
    payoff: Option<String>,
    /// Maturity in years.
    #[arg(long = "T", default_value_t = 1.0, value_parser = positive_f64)]
    maturity: f64,
}

#[derive(Args)]
struct McArgs {
    /// Number of Monte Carlo paths; scientific notation such as 1e6 is accepted.
    #[arg(long, default_value = "1e5", value_parser = count)]
    paths: usize,
    /// Total time steps per path (default 512 per unit maturity).
    #[arg(long, value_parser = count)]
    steps: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Disable the Brownian-bridge crossing correction.
    #[arg(long)]
    no_bridge: bool,
    /// Use antithetic pairs on each side.
    #[arg(long)]
    antithetic: bool,
    /// Multiply reported prices by exp(-rT).
    #[arg(long)]
    discount: bool,
    /// Paths per parallel block.
    #[arg(long, default_value_t = mc::DEFAULT_BLOCK_SIZE, value_parser = count)]
    block_size: usize,
}

impl McArgs {
    fn config(&self) -> McConfig {
        McConfig {
            paths: self.paths,
            steps: self.steps,
            seed: self.seed,
            bridge: !self.no_bridge,
            antithetic: self.antithetic,
            block_size: self.block_size,
            discount: self.discount,
            ..McConfig::default()
        }
    }
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Price this emitted portfolio by exact terminal sampling instead of the knock-out claim.
    #[arg(long)]
    portfolio: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a few sample paths (time, Brownian coordinates, log prices) as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long, default_value_t = 8, value_parser = count)]
    dump_paths: usize,
}

#[derive(Args)]
struct HedgeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output path for the portfolio JSON (standard output if absent).
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Verify this emitted portfolio instead of a freshly built one.
    #[arg(long)]
    portfolio: Option<PathBuf>,
    /// Scale the discretization allowance by reference_steps / steps.
    #[arg(long, value_parser = count)]
    reference_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    /// JSON with `system`, `t`, `x` and optionally a list of points `y`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurvivalArgs {
    /// JSON with `system`, `t` and `x`.
    #[arg(long)]
    input: PathBuf,
    /// Grid points per axis of the chamber quadrature.
    #[arg(long, default_value_t = 400, value_parser = count)]
    points: usize,
    /// Also estimate by path simulation with this many paths.
    #[arg(long, value_parser = count)]
    mc_paths: Option<usize>,
    #[arg(long, default_value_t = 512, value_parser = count)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SymmetryArgs {
    #[arg(long, default_value_t = 0.2, value_parser = positive_f64)]
    sigma: f64,
    #[arg(long, default_value_t = 0.02)]
    r: f64,
    #[arg(long = "S0", default_value_t = 100.0, value_parser = positive_f64)]
    spot: f64,
    #[arg(long = "H", default_value_t = 90.0, value_parser = positive_f64)]
    level: f64,
    #[arg(long = "K", default_value_t = 100.0, value_parser = positive_f64)]
    strike: f64,
    #[arg(long = "T", default_value_t = 1.0, value_parser = positive_f64)]
    maturity: f64,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn count(s: &str) -> Result<usize, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v >= 1.0) || v.fract() != 0.0 || v > 1e15 {
        return Err(format!("{s:?} must be a positive integer"));
    }
    Ok(v as usize)
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(format!("{s:?} must be positive"));
    }
    Ok(v)
}

/// Input problems exit with 2, failed verifications with 1.
enum Failure {
    Input(String),
    Check,
}

impl From<reflection_hedge::Error> for Failure {
    fn from(e: reflection_hedge::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn in_file(path: &Path, e: reflection_hedge::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn load_setup(path: &Path) -> Result<Setup, Failure> {
    let cfg = ModelConfig::load(path).map_err(|e| in_file(path, e))?;
    cfg.build().map_err(|e| in_file(path, e))
}

fn load_portfolio(path: &Path) -> Result<HedgePortfolio, Failure> {
    let text = fs::read_to_string(path).map_err(|e| in_file(path, e.into()))?;
    HedgePortfolio::from_json(&text).map_err(|e| in_file(path, e))
}

fn payoff(args: &ModelArgs) -> Result<PayoffSpec, Failure> {
    let text = args
        .payoff
        .as_deref()
        .ok_or_else(|| Failure::Input("--payoff is required".into()))?;
    Ok(text.parse()?)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| in_file(path, e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn header() -> String {
    format!("# {VERSION}\n")
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn price(args: &PriceArgs) -> Result<(), Failure> {
    let setup = load_setup(&args.model.config)?;
    let cfg = args.mc.config();
    let t = args.model.maturity;
    let mut text = header();
    text.push_str("claim,value,stderr,paths,steps\n");
    match &args.portfolio {
        Some(path) => {
            let portfolio = load_portfolio(path)?;
            let (rhs, vanilla) = hedge::price_portfolio_and_vanilla(&setup.model, &portfolio, t, &cfg)?;
            for (name, e) in [("portfolio", rhs), ("vanilla", vanilla)] {
                let _ = writeln!(text, "{name},{},{},{},0", fmt(e.value), fmt(e.std_error), e.samples);
            }
        }
        None => {
            let payoff = payoff(&args.model)?;
            payoff.validate(setup.barrier.m())?;
            let e = price_knockout_mc(&setup.model, &setup.barrier, &payoff, t, &cfg)?;
            let _ = writeln!(
                text,
                "knockout,{},{},{},{}",
                fmt(e.value),
                fmt(e.std_error),
                e.samples,
                cfg.steps_for(t)
            );
        }
    }
    if let Some(path) = &args.dump {
        write_output(Some(path), &dump_paths(&setup, t, &cfg, args.dump_paths))?;
    }
    write_output(args.out.as_deref(), &text)
}

fn dump_paths(setup: &Setup, t: f64, cfg: &McConfig, n: usize) -> String {
    let mut text = header();
    let d = setup.model.brownian_dim();
    let k = setup.model.n_assets();
    let mut cols = vec!["path".to_string(), "t".to_string()];
    cols.extend((1..=d).map(|j| format!("x{j}")));
    cols.extend((0..k).map(|i| format!("log_s{i}")));
    text.push_str(&cols.join(","));
    text.push('\n');
    let mut rng = mc::substream(cfg.seed, u64::MAX);
    for p in 0..n {
        let rec = sample_path(&setup.model, &setup.barrier, t, cfg.steps_for(t), &mut rng);
        for ((time, x), ls) in rec.times.iter().zip(&rec.x).zip(&rec.log_prices) {
            let mut row = vec![p.to_string(), fmt(*time)];
            row.extend(x.iter().map(|v| fmt(*v)));
            row.extend(ls.iter().map(|v| fmt(*v)));
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    text
}

fn hedge_cmd(args: &HedgeArgs) -> Result<(), Failure> {
    let setup = load_setup(&args.model.config)?;
    let payoff = payoff(&args.model)?;
    let portfolio = build_portfolio(&setup.barrier, &setup.group, &payoff, &setup.label, args.model.maturity)?;
    let mut json = portfolio.to_json()?;
    json.push('\n');
    write_output(args.emit.as_deref(), &json)?;
    if args.emit.is_some() {
        eprintln!("{} terms written", portfolio.terms.len());
    }
    Ok(())
}

fn report_csv(report: &HedgeReport) -> String {
    format!("{}{}\n{}\n", header(), HedgeReport::CSV_HEADER, report.csv_row())
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let setup = load_setup(&args.model.config)?;
    let mut cfg = args.mc.config();
    cfg.convergence_reference_steps = args.reference_steps;
    let t = args.model.maturity;
    let portfolio = match &args.portfolio {
        Some(path) => load_portfolio(path)?,
        None => build_portfolio(&setup.barrier, &setup.group, &payoff(&args.model)?, &setup.label, t)?,
    };
    let report = hedge::verify_portfolio(&setup.model, &setup.barrier, &portfolio, t, &cfg)?;
    write_output(args.out.as_deref(), &report_csv(&report))?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn read_density_config(path: &Path) -> Result<DensityConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| in_file(path, e.into()))?;
    DensityConfig::from_json(&text).map_err(|e| in_file(path, e))
}

fn kernel(cfg: &DensityConfig) -> Result<KilledKernel, Failure> {
    let fs = cfg.system.build()?;
    let group = generate_group(&fs, cfg.max_order.unwrap_or(reflection::DEFAULT_MAX_ORDER))?;
    Ok(KilledKernel::new(&fs, &group)?)
}

fn density(args: &DensityArgs) -> Result<(), Failure> {
    let cfg = read_density_config(&args.input)?;
    let k = kernel(&cfg)?;
    let x = DVector::from_vec(cfg.x.clone());
    let points = cfg.points(k.fundamental())?;
    let mut text = header();
    let mut cols: Vec<String> = (1..=k.fundamental().dim()).map(|j| format!("y{j}")).collect();
    cols.push("density".into());
    text.push_str(&cols.join(","));
    text.push('\n');
    for y in &points {
        let p = k.density(cfg.t, &x, y)?;
        let mut row: Vec<String> = y.iter().map(|v| fmt(*v)).collect();
        row.push(fmt(p));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)
}

fn survival(args: &SurvivalArgs) -> Result<(), Failure> {
    let cfg = read_density_config(&args.input)?;
    let k = kernel(&cfg)?;
    let x = DVector::from_vec(cfg.x.clone());
    let quad = QuadratureSpec {
        points_per_axis: args.points,
        seed: args.seed,
        ..QuadratureSpec::default()
    };
    let mut text = header();
    text.push_str("method,value,stderr\n");
    let q = k.survival_probability(cfg.t, &x, &quad)?;
    let _ = writeln!(text, "quadrature,{},{}", fmt(q.value), fmt(q.std_error));
    if let Some(paths) = args.mc_paths {
        let e = reflection_hedge::mc_survival(k.fundamental(), cfg.t, &x, paths, args.steps, args.seed)?;
        let _ = writeln!(text, "simulation,{},{}", fmt(e.value), fmt(e.std_error));
    }
    write_output(args.out.as_deref(), &text)
}

fn symmetry(args: &SymmetryArgs) -> Result<(), Failure> {
    let r = put_call_symmetry_case(
        args.sigma,
        args.r,
        args.spot,
        args.level,
        args.strike,
        args.maturity,
        &args.mc.config(),
    )?;
    let mut text = header();
    text.push_str("exponent,expected_exponent,martingale_exponent,structure_error,");
    text.push_str(HedgeReport::CSV_HEADER);
    text.push('\n');
    let _ = writeln!(
        text,
        "{},{},{},{},{}",
        fmt(r.exponent),
        fmt(r.expected_exponent),
        fmt(r.martingale_exponent),
        fmt(r.structure_error),
        r.identity.csv_row()
    );
    write_output(args.out.as_deref(), &text)?;
    if r.pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Price(a) => price(a),
        Command::Hedge(a) => hedge_cmd(a),
        Command::Verify(a) => verify(a),
        Command::Density(a) => density(a),
        Command::Survival(a) => survival(a),
        Command::SymmetryCheck(a) => symmetry(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
