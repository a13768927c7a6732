use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use swarmfo::cli::{run, Emit, RunConfig};
use swarmfo::Mode;

/// Simulate a unicycle swarm steered into formation by distributed feedback
/// optimisation.
///
/// Exit status: 0 converged, 2 not converged, 1 error.
#[derive(Debug, Parser)]
#[command(name = "swarmfo", version)]
struct Args {
    /// Built-in scenario name (pentagon, e-shape-good, e-shape-bad) or path
    /// to a scenario JSON file.
    #[arg(long, default_value = "pentagon")]
    scenario: String,

    /// centralized or distributed.
    #[arg(long, default_value = "centralized", value_parser = parse_mode)]
    mode: Mode,

    /// Integration step override, seconds.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,

    /// Horizon override, seconds.
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,

    /// Seed override for randomly initialised scenarios.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Comma-separated outputs: trajectory_csv, summary_json, curve_csv.
    /// Defaults to trajectory_csv,summary_json, or curve_csv with --sweep-a.
    #[arg(long, value_delimiter = ',', value_parser = parse_emit)]
    emit: Option<Vec<Emit>>,

    /// Comma-separated formation weights to sweep with the scenario's
    /// target weight held fixed.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    sweep_a: Option<Vec<f64>>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: swarmfo::Error| e.to_string())
}

fn parse_emit(s: &str) -> Result<Emit, String> {
    s.parse().map_err(|e: swarmfo::Error| e.to_string())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let emit = args.emit.unwrap_or_else(|| match args.sweep_a {
        Some(_) => vec![Emit::CurveCsv],
        None => vec![Emit::TrajectoryCsv, Emit::SummaryJson],
    });
    let config = RunConfig {
        scenario: args.scenario,
        mode: args.mode,
        dt: args.dt,
        t_final: args.t_final,
        seed: args.seed,
        output_dir: args.out,
        emit,
        sweep_a: args.sweep_a,
    };
    ExitCode::from(run(&config) as u8)
}
