//! `drn`: run, sweep and validate dynamic radar network scenarios.

mod error;
mod output;
mod source;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use drn_core::exec::Execution;
use drn_core::harness::{run_monte_carlo, MonteCarloOptions};

use crate::error::CliError;
use crate::output::{Outputs, RunManifest};
use crate::source::{Overrides, Source};
use crate::sweep::{run_sweep, Grid};

#[derive(Parser)]
#[command(name = "drn", version, about = "Dynamic radar network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run of one scenario.
    Simulate(SimulateArgs),
    /// One Monte Carlo run per value of a single parameter.
    Sweep(SweepArgs),
    /// Check a scenario and report every invalid field.
    Validate(ValidateArgs),
    /// Print the resolved scenario as JSON.
    Show(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for the Monte Carlo runs (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    run: RunArgs,
    /// Also write the first episode's trajectory.
    #[arg(long)]
    trajectory: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    run: RunArgs,
    /// Axis and grid, e.g. `rho=1,0.1,0.01`. Axes: N, sigma_r0, sigma_b0,
    /// rho, n_chirp, h_max, r_max (`inf` for unlimited).
    #[arg(long)]
    axis: String,
    /// Success-rate thresholds in metres (default: the scenario's).
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
        Command::Show(a) => show(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Invalid(fields) = &e {
                for f in fields {
                    eprintln!("  {f}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn execution(threads: Option<usize>) -> Execution {
    Execution::Parallel { threads }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let started = unix_now();
    let clock = Instant::now();
    let (scenario, applied) = a.source.resolve(&a.overrides)?;
    let run = run_monte_carlo(
        &scenario,
        MonteCarloOptions {
            exec: execution(a.run.threads),
            keep_first_log: a.trajectory,
        },
    )?;
    let report = &run.report;

    let mut out = Outputs::new(&a.run.out);
    out.add("metrics.json", output::json(report));
    out.add("sr_curve.csv", output::sr_curve_csv(report)?);
    out.add("rmse.csv", output::rmse_csv(report)?);
    if let Some(log) = &run.first_log {
        out.add("trajectory.csv", output::trajectory_csv(log)?);
    }
    let manifest = RunManifest {
        command: "simulate",
        scenario_path: a.source.path_string(),
        preset: a.source.preset.clone(),
        overrides: applied,
        sweep: None,
        master_seed: scenario.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        threads: a.run.threads,
        started_unix_s: started,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        outputs: Vec::new(),
        scenario: scenario.clone(),
    };
    out.commit(manifest)?;

    println!(
        "{}: {} runs x {} steps x {} agents",
        report.scenario, report.runs, report.steps, report.agents
    );
    println!(
        "rmse position {:.4} m, velocity {:.4} m/s",
        report.rmse_position_m, report.rmse_velocity_mps
    );
    let sr: Vec<String> = report
        .thresholds_m
        .iter()
        .zip(&report.success_rate)
        .map(|(t, s)| format!("{t}m:{s:.3}"))
        .collect();
    println!("success rate {}", sr.join(" "));
    println!("outputs in {}", a.run.out.display());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let started = unix_now();
    let clock = Instant::now();
    let grid = Grid::parse(&a.axis)?;
    let (scenario, applied) = a.source.resolve(&a.overrides)?;
    let thresholds = a
        .thresholds
        .clone()
        .unwrap_or_else(|| scenario.thresholds_m.clone());
    if thresholds.is_empty() || thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(CliError::Usage(
            "thresholds must be finite and non-negative".into(),
        ));
    }
    let rows = run_sweep(&scenario, &grid, &thresholds, execution(a.run.threads))?;

    let mut out = Outputs::new(&a.run.out);
    out.add("sweep.csv", output::sweep_csv(&grid, &thresholds, &rows)?);
    let manifest = RunManifest {
        command: "sweep",
        scenario_path: a.source.path_string(),
        preset: a.source.preset.clone(),
        overrides: applied,
        sweep: Some(output::SweepRecord {
            axis: grid.axis.name().to_string(),
            values: grid.labels(),
            thresholds_m: thresholds.clone(),
        }),
        master_seed: scenario.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        threads: a.run.threads,
        started_unix_s: started,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        outputs: Vec::new(),
        scenario: scenario.clone(),
    };
    out.commit(manifest)?;

    for (label, row) in grid.labels().iter().zip(&rows) {
        println!(
            "{}={label}: rmse {:.4} m, sr {:?}",
            grid.axis.name(),
            row.rmse_position_m,
            row.success_rate
        );
    }
    println!("outputs in {}", a.run.out.display());
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let (scenario, _) = a.source.resolve(&a.overrides)?;
    println!("{}: ok", scenario.name);
    Ok(())
}

fn show(a: ValidateArgs) -> Result<(), CliError> {
    let (scenario, _) = a.source.resolve(&a.overrides)?;
    println!("{}", scenario.to_json());
    Ok(())
}
