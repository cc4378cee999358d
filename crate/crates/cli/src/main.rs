#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coopsim::sim_engine::ScenarioMode;

#[derive(Parser)]
#[command(name = "coopsim", version, about = "Cooperative intersection crossing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and print its metrics.
    Run(RunArgs),
    /// Run every scenario mode (or one) for a number of trials and write CSV reports.
    Experiment(ExperimentArgs),
    /// Network load of periodic path messages and how many cars a medium carries.
    Bandwidth(BandwidthArgs),
    /// Draw speed-versus-position plots from trace CSVs.
    Plot(PlotArgs),
}

#[derive(Args)]
pub struct ScenarioArgs {
    /// Scenario file, or `default` for the built-in two-car crossing.
    #[arg(long, default_value = "default")]
    pub scenario: String,
    /// Master seed. Falls back to COOPSIM_SEED, then to the scenario's master_seed.
    #[arg(long, env = "COOPSIM_SEED")]
    pub seed: Option<u64>,
    /// Set a scenario field by dotted path, e.g. `params.d_margin=5.0`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Scenario mode; defaults to the one in the scenario file.
    #[arg(long)]
    pub mode: Option<ScenarioMode>,
    /// Index of the trial within the seeded sequence.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    /// Write the speed trace of the trial here.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Output directory for the CSV files.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Run only this mode instead of all three.
    #[arg(long)]
    pub mode: Option<ScenarioMode>,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Args)]
pub struct BandwidthArgs {
    /// Points per future path; without it a full 1460-byte UDP payload is assumed.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=120))]
    pub points: Option<u64>,
    /// Messages per second per stream.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    /// Path streams per car.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub streams: u32,
    /// Data rate of the wireless medium, bit/s.
    #[arg(long, default_value_t = 6.0e6)]
    pub media: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args)]
pub struct PlotArgs {
    /// Directory holding the trace CSVs written by `experiment`.
    #[arg(long, default_value = "results")]
    pub traces: PathBuf,
    /// Output directory; defaults to the trace directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated scenario modes to plot.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "stand_alone,future_path_only,future_path_with_rsu"
    )]
    pub scenarios: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Bandwidth(a) => commands::bandwidth(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
