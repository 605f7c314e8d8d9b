//! Command-line entry point.
//!
//! Exit codes: 0 when every invariant and assertion passes, 2 when a solver
//! aborted (the report records the failure), 1 for configuration or IO
//! errors and for runs with failing invariants.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sktlab::config::ScenarioConfig;
use sktlab::runner::run_scenario;
use sktlab::sweep::{run_sweep, SweepConfig};
use sktlab_core::analysis::{bootstrap_ladder, mu_exponent};

#[derive(Parser)]
#[command(name = "sktlab", about = "Cross-diffusion laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to ./sktlab-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent scenario bound.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
}

#[derive(Args)]
struct LadderArgs {
    /// Space dimension (>= 2).
    #[arg(long)]
    n: usize,
    /// Starting exponent.
    #[arg(long, default_value_t = 4.0)]
    l1: f64,
    /// Target integrability of the initial data.
    #[arg(long)]
    p0: f64,
    /// Also evaluate the gain exponent mu(q, n) at these q.
    #[arg(long = "q")]
    qs: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json.
    Run(RunArgs),
    /// Expand a parameter grid, run all scenarios, aggregate.
    Sweep(SweepArgs),
    /// Diagnostics-only run on existing field files.
    Diagnose(RunArgs),
    /// Bootstrap exponent ladder calculator.
    Ladder(LadderArgs),
}

fn load_scenario(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read config {}", path.display()))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn out_dir(choice: &Option<PathBuf>) -> PathBuf {
    choice.clone().unwrap_or_else(sktlab::fieldio::default_output_dir)
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let cfg = load_scenario(&args.config)?;
    let report = run_scenario(&cfg, &out_dir(&args.out), args.seed)?;
    for check in &report.invariants {
        println!(
            "{}: {} (margin {:+.3e})",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.margin
        );
    }
    if let Some(failure) = &report.failure {
        eprintln!("{failure}");
        return Ok(ExitCode::from(2));
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn sweep(args: &SweepArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("read config {}", args.config.display()))?;
    let cfg: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("parse error at line {}: {}", e.line(), e))?;
    let report = run_sweep(&cfg, &out_dir(&args.out), args.jobs)?;
    println!(
        "{} scenarios, {} passed",
        report.scenario_count,
        report.scenarios.iter().filter(|s| s.passed).count()
    );
    for a in &report.assertions {
        println!("{}: {} (value {:.6})", a.description, if a.passed { "pass" } else { "FAIL" }, a.value);
    }
    if report.scenarios.iter().any(|s| s.failure.is_some()) {
        return Ok(ExitCode::from(2));
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn ladder(args: &LadderArgs) -> Result<ExitCode> {
    let ladder = bootstrap_ladder(args.n, args.l1, args.p0)?;
    let mut mu_table = serde_json::Map::new();
    for &q in &args.qs {
        mu_table.insert(format!("{q}"), serde_json::json!(mu_exponent(q, args.n)?));
    }
    let doc = serde_json::json!({
        "n": ladder.n,
        "l1": ladder.l1,
        "p0": ladder.p0,
        "terms": ladder.terms,
        "terminal": ladder.terminal,
        "unbounded": ladder.unbounded,
        "mu": mu_table,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) | Command::Diagnose(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Ladder(args) => ladder(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
