//! `homesim`: simulate smart-home sensor data, extract features, train
//! and apply anomaly detectors, and score them.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homesim::anomalies::AnomalyKind;
use homesim::detectors::model_io::Method;
use homesim::experiment::Scale;
use homesim::Error;

#[derive(Parser)]
#[command(name = "homesim", version, about = "Smart-home anomaly simulation and detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate sensor events and anomaly labels into a run directory.
    Simulate(SimulateArgs),
    /// Compute daily series and forgetting features for a run.
    Preprocess(RunArgs),
    /// Fit one detector on a run's data.
    Train(TrainArgs),
    /// Apply a trained detector to a run's data.
    Detect(DetectArgs),
    /// Score a predicted label track against the truth.
    Evaluate(EvaluateArgs),
    /// Train and test every detector on fresh simulations and compare
    /// with the published results.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated days, overriding the configuration.
    #[arg(long)]
    days: Option<u64>,
    /// Run directory; falls back to the configuration's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run directory written by `simulate`.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    anomaly: AnomalyKind,
    #[arg(long)]
    method: Method,
    /// Model file; defaults to <run>/models/<anomaly>-<method>.model.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the random forest; defaults to one derived from the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the published statistical thresholds when the training data has
    /// no positive days instead of failing.
    #[arg(long)]
    threshold_fallback: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Minimum kept alarm length in track units; defaults per detector.
    #[arg(long)]
    denoise: Option<u64>,
    /// Prediction file; defaults to <run>/predictions/<anomaly>-<method>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted label track.
    #[arg(long)]
    pred: PathBuf,
    /// True label track; taken from --run when omitted.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    run: Option<PathBuf>,
    /// Days used for the false-alarm rate; defaults to the track span.
    #[arg(long)]
    days: Option<f64>,
    /// Denoise the prediction before interval scoring.
    #[arg(long, default_value_t = 0)]
    denoise: u64,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// desk or full.
    scale: Scale,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    replicates: Option<u64>,
    /// Days per simulation, overriding the scale.
    #[arg(long)]
    days: Option<u64>,
    /// Directory for report.csv and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 when a row falls outside its band.
    #[arg(long)]
    strict: bool,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::UnsupportedPairing { .. }
            | Error::DimensionMismatch { .. }
            | Error::TrackMismatch(_)
            | Error::Parse { .. }
            | Error::Model(_)
            | Error::UnknownSensor(_)
            | Error::EventBeyondHorizon { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a.config.as_deref(), a.seed, a.days, a.out.as_deref()),
        Command::Preprocess(a) => commands::preprocess(&a.run),
        Command::Train(a) => commands::train(&commands::TrainRequest {
            run: &a.run,
            anomaly: a.anomaly,
            method: a.method,
            out: a.out.as_deref(),
            seed: a.seed,
            threshold_fallback: a.threshold_fallback,
        }),
        Command::Detect(a) => commands::detect(&a.run, &a.model, a.denoise, a.out.as_deref()),
        Command::Evaluate(a) => {
            commands::evaluate(&a.pred, a.truth.as_deref(), a.run.as_deref(), a.days, a.denoise, a.out.as_deref())
        }
        Command::Reproduce(a) => commands::reproduce(a.scale, a.seed, a.replicates, a.days, a.out.as_deref(), a.strict),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
