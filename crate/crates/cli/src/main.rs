//! `lckf-lab`: Monte Carlo runs, filter comparisons and oracle validation for scenario files.
//!
//! Exit codes: 0 on success, 2 for unreadable or invalid input (scenario file or flags), 3 when
//! the model or a validation check fails, 4 for errors raised while filtering or writing reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lckf_core::harness::{self, CheckStatus, ComparisonReport, FilterKind, RunReport, Scenario};
use lckf_core::{model, scenario, Error};

const THREADS_VAR: &str = "LCKF_LAB_THREADS";

#[derive(Parser)]
#[command(name = "lckf-lab", version, about = "Linearly constrained Kalman filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run of the filter selected by the scenario's schedule preset.
    Run(RunArgs),
    /// Paired comparison of several filters on the same trajectories.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated filter names (kf, lmvdrf, lckf, lclmvdrf, lcmve).
        #[arg(long, value_delimiter = ',', required = true)]
        filters: Vec<String>,
    },
    /// Model checks, uncorrelation conditions and recursion-versus-batch equivalence.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Overrides `outputs.dir` from the scenario file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: Option<u64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Scenario { .. } => 2,
            Error::Model(_) => 3,
            _ => 4,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new(2, format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new(4, format!("cannot start {threads} worker threads: {e}")))
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => run(&args),
        Command::Compare { run, filters } => compare(&run, &filters),
        Command::Validate { scenario, horizon } => validate(&scenario, horizon),
    }
}

/// Loads the scenario and applies the command-line overrides; returns it with the output dir.
fn load(args: &RunArgs) -> Result<(Scenario, PathBuf), Failure> {
    let file = scenario::load(&args.scenario)?;
    let mut s = file.to_scenario(args.horizon.map(|h| h as usize))?;
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(trials) = args.trials {
        s.trials = trials as usize;
    }
    let report = model::validate_model(&s.model);
    if !report.passed() {
        let failed: Vec<String> =
            report.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
        return Err(Failure::new(3, format!("model validation failed\n  {}", failed.join("\n  "))));
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| file.outputs.dir.clone());
    Ok((s, out_dir))
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let (scenario, out_dir) = load(args)?;
    let report = harness::run_trials(&scenario)?;
    harness::write_outputs(&out_dir, &report, |buf| report.write_csv(buf))?;
    print_run(&report);
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn parse_filters(names: &[String]) -> Result<Vec<FilterKind>, Failure> {
    let kinds = names
        .iter()
        .map(|n| n.trim())
        .filter(|n| !n.is_empty())
        .map(|n| n.parse::<FilterKind>().map_err(|e| Failure::new(2, e)))
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(Failure::new(2, "--filters needs at least one filter name"));
    }
    Ok(kinds)
}

fn compare(args: &RunArgs, names: &[String]) -> Result<(), Failure> {
    let kinds = parse_filters(names)?;
    let (scenario, out_dir) = load(args)?;
    let report = harness::compare_filters(&scenario, &kinds)?;
    harness::write_outputs(&out_dir, &report, |buf| report.write_csv(buf))?;
    print_comparison(&report);
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn validate(path: &Path, horizon: Option<usize>) -> Result<(), Failure> {
    let scenario = scenario::load(path)?.to_scenario(horizon)?;
    let validation = harness::validate_scenario(&scenario)?;
    for row in &validation.rows {
        let status = match row.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        println!("{status:<5} {:<28} {}", row.name, row.detail);
    }
    if validation.passed() {
        Ok(())
    } else {
        Err(Failure::new(3, "validation failed"))
    }
}

fn print_run(report: &RunReport) {
    println!(
        "{} / {}: {} trials, seed {}, {:.2}s",
        report.scenario,
        report.filter,
        report.trials,
        report.base_seed,
        report.elapsed.as_secs_f64()
    );
    println!("{:>4} {:>14} {:>14} {:>12} {:>12}", "step", "est_mse_trace", "theo_mse_trace", "bias_norm", "residual");
    for s in &report.steps {
        println!(
            "{:>4} {:>14.6e} {:>14.6e} {:>12.3e} {:>12.3e}",
            s.step, s.est_mse_trace, s.theo_mse_trace, s.bias_norm, s.constraint_residual
        );
    }
}

fn print_comparison(report: &ComparisonReport) {
    println!("{}: {} paired trials, seed {}, {:.2}s", report.scenario, report.trials, report.base_seed, report.elapsed.as_secs_f64());
    print!("{:>4}", "step");
    for f in &report.filters {
        print!(" {:>16}", format!("est_{}", f.filter));
    }
    println!();
    let horizon = report.filters.first().map_or(0, |f| f.steps.len());
    for i in 0..horizon {
        print!("{:>4}", i + 1);
        for f in &report.filters {
            print!(" {:>16.6e}", f.steps[i].est_mse_trace);
        }
        println!();
    }
    for o in &report.orderings {
        println!(
            "{} <= {}: theoretical {}, min eigen gap {:.3e}, empirical at {}/{} steps",
            o.first, o.second, o.theoretical_trace_leq, o.min_eigen_gap, o.empirical_leq_steps, horizon
        );
    }
}
