mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavecast_core::calibrate::ScaleMethod;
use wavecast_core::pipeline::{Split, SweepParam};
use wavecast_core::synthwave::WaveKind;

#[derive(Debug, Parser)]
#[command(
    name = "wavecast",
    version,
    about = "Probabilistic wave-height forecasting with LSTM deep ensembles"
)]
struct Cli {
    /// JSON run configuration; defaults are used when absent.
    #[arg(long, global = true, env = "WAVECAST_CONFIG")]
    config: Option<PathBuf>,

    /// Ensemble members trained concurrently (results do not depend on it).
    #[arg(long, global = true, env = "WAVECAST_JOBS")]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic wave-height series as CSV.
    Synth(SynthArgs),
    /// Train a deep ensemble and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a series.
    Evaluate(EvaluateArgs),
    /// Fit the standard-deviation scaling factor on the validation split.
    Calibrate(CalibrateArgs),
    /// Forecast the next interval from a single input window.
    Predict(PredictArgs),
    /// Retrain or re-slice over a list of hyperparameter values.
    Sweep(SweepArgs),
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value = "composite", value_parser = parse_kind)]
    preset: WaveKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Sampling interval in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Noise standard deviation in meters.
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for per-member training curves and the run summary.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    /// Use the stored scaling factor.
    #[arg(long)]
    calibrated: bool,
    /// Receives metrics.json, per_index.csv and the reliability CSVs.
    #[arg(long, short)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Option<ScaleMethod>,
    /// Where to write the calibrated checkpoint; defaults to overwriting the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Receives calibration.json and the before/after reliability CSVs.
    #[arg(long)]
    report_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Series CSV holding exactly one input window.
    #[arg(long)]
    window: PathBuf,
    #[arg(long)]
    calibrated: bool,
    /// Forecast CSV; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_param)]
    param: SweepParam,
    /// Comma list and/or inclusive ranges, e.g. `100,200,300` or `2..10`.
    #[arg(long)]
    values: String,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum ConfigCommand {
    /// Write a configuration file with every default filled in.
    Init {
        /// Destination; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<WaveKind, String> {
    s.parse().map_err(|e: wavecast_core::Error| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: wavecast_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<ScaleMethod, String> {
    s.parse().map_err(|e: wavecast_core::Error| e.to_string())
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: wavecast_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::from(1)
        }
    }
}
