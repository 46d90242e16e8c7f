//! Command-line front end.
//!
//! Every flag can also be given in a JSON file passed with `--config`, keyed by
//! the long flag name. Flags override the file; the file overrides defaults.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or parameter values. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running. Exit code 1.
    #[error(transparent)]
    Runtime(#[from] lse_rates::Error),
}

impl CliError {
    /// Reclassifies a parameter validation failure as a usage error.
    fn usage(e: lse_rates::Error) -> Self {
        match e {
            lse_rates::Error::Invalid(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lse-rates", version, about = "Cost-to-serve rate groups from smart-meter data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-archetype population.
    Synth(SynthArgs),
    /// Find the minimum-rate group of a given size.
    Solve(SolveArgs),
    /// Write the minimum-rate curve and the forecast-error curve.
    Curves(CurvesArgs),
    /// Segment the population into rate groups under a CV limit.
    Segment(SegmentArgs),
    /// Replay the validate window for one group and settle its purchases.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Meter CSV (consumer_id,date,h00..h23).
    #[arg(long)]
    pub meter: Option<PathBuf>,
    /// Price CSV with a #unit= header line.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Bisection tolerance in cents/kWh [default: 1e-6].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Master random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: .].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Fraction of days used for training [default: 0.75].
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// JSON config keyed by long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON population spec; flags and config keys override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of consumers [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of days [default: 120].
    #[arg(long)]
    pub days: Option<usize>,
    /// Share of peaky consumers [default: 0.5].
    #[arg(long)]
    pub fraction_peaky: Option<f64>,
    /// Coefficient of variation of hourly reading noise [default: 0.3].
    #[arg(long, allow_hyphen_values = true)]
    pub noise_cv: Option<f64>,
    /// Mean daily usage in kWh [default: 20].
    #[arg(long)]
    pub base_kwh: Option<f64>,
    /// Real-time price noise sd in cents/kWh [default: 0.5].
    #[arg(long)]
    pub rt_noise_sd: Option<f64>,
    /// Lognormal sd of per-consumer scale [default: 0.3].
    #[arg(long)]
    pub scale_spread: Option<f64>,
    /// Maximum blend toward a flat profile [default: 0].
    #[arg(long)]
    pub shape_spread: Option<f64>,
    /// First date, YYYY-MM-DD [default: 2024-01-01].
    #[arg(long)]
    pub start_date: Option<chrono::NaiveDate>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Group size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Days whose prices define the rates: train, validate or all [default: train].
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub common: Common,
    /// Group sizes, comma separated [default: 20 log-spaced sizes from 1 to N].
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Random groups per size [default: 50].
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Maximum forecast CV in percent.
    #[arg(long)]
    pub cv_threshold: Option<f64>,
    /// What to do with consumers no qualifying group can take: aggregate or drop [default: aggregate].
    #[arg(long)]
    pub policy: Option<String>,
    /// Candidate group sizes, comma separated [default: 20 log-spaced sizes from 10 to the remaining count].
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// CSV with a consumer_id column (such as solve's selection.csv) [default: whole population].
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Serve the minimum-rate group of this size instead of a selection file.
    #[arg(long)]
    pub m: Option<usize>,
    /// Settlement design: one_sided or two_sided [default: one_sided].
    #[arg(long)]
    pub design: Option<String>,
    /// Number of validate days to replay [default: all].
    #[arg(long)]
    pub days: Option<usize>,
}

/// Long flag names accepted by subcommand `name`, minus `config` and `help`.
fn flag_names(name: &str) -> Vec<String> {
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(name).expect("known subcommand");
    sub.get_arguments()
        .filter_map(|a| a.get_long())
        .filter(|l| !matches!(*l, "config" | "help"))
        .map(str::to_owned)
        .collect()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Solve(a) => commands::solve(a),
        Command::Curves(a) => commands::curves(a),
        Command::Segment(a) => commands::segment(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
