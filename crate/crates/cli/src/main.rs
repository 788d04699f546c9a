//! `otdr`: synthesize traces, build datasets, train and benchmark the
//! classifier, diagnose single traces and place faults on a route.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "otdr", version, about = "OTDR fault diagnostics workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize one trace from a scenario file or a reference archetype
    Synth(SynthArgs),
    /// Generate a labelled dataset: trace CSVs plus a JSONL manifest
    Dataset(DatasetArgs),
    /// Train the CNN on a dataset manifest
    Train(TrainArgs),
    /// Benchmark trained weights against the threshold detector on a fresh
    /// test set
    Eval(EvalArgs),
    /// Run dataset generation, training and evaluation end to end in memory
    Bench(BenchArgs),
    /// Run both detectors on one trace file
    Diagnose(DiagnoseArgs),
    /// Convert a fiber distance to coordinates on a route
    Locate(LocateArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["scenario", "reference"])))]
pub struct SynthArgs {
    /// Scenario JSON file
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Reference archetype: 0 healthy, 1 splice, 2 bend, 3 connector
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub reference: Option<u8>,
    /// Output trace CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Write the noiseless trace
    #[arg(long, conflicts_with = "noisy")]
    pub clean: bool,
    /// Add seeded noise (the default)
    #[arg(long)]
    pub noisy: bool,
    /// Noise seed, overriding the scenario's rng_seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Sampler configuration JSON (defaults apply to missing fields)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Acquisition configuration JSON
    #[arg(long)]
    pub acquisition: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Number of traces, overriding the config
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed, overriding the config
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CnnOverrides {
    /// CNN configuration JSON
    #[arg(long = "cnn-config")]
    pub cnn_config: Option<PathBuf>,
    /// Epochs, overriding the config
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Weight-initialization and shuffling seed, overriding the config
    #[arg(long = "init-seed")]
    pub init_seed: Option<u64>,
    /// Disable training-time augmentation
    #[arg(long = "no-augment")]
    pub no_augment: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset manifest (JSONL)
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub cnn: CnnOverrides,
    /// Output weights JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV (default: next to the weights, `.log.csv`)
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ThresholdArgs {
    /// Threshold configuration JSON; flags below override its fields
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(long = "window-m")]
    pub window_m: Option<f64>,
    #[arg(long = "loss-cutoff-db")]
    pub loss_cutoff_db: Option<f64>,
    #[arg(long = "spike-cutoff-db")]
    pub spike_cutoff_db: Option<f64>,
    #[arg(long = "bend-loss-cutoff-db")]
    pub bend_loss_cutoff_db: Option<f64>,
    #[arg(long = "guard-m")]
    pub guard_m: Option<f64>,
    #[arg(long = "spike-width-m")]
    pub spike_width_m: Option<f64>,
    #[arg(long = "event-span-m")]
    pub event_span_m: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Trained weights JSON
    #[arg(long)]
    pub weights: PathBuf,
    /// Test-set sampler configuration JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Acquisition configuration JSON
    #[arg(long)]
    pub acquisition: Option<PathBuf>,
    /// Number of test traces (default 1500)
    #[arg(long)]
    pub n: Option<usize>,
    /// Test master seed (default 2); must differ from the training seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Position tolerance reported alongside the localization error
    #[arg(long, default_value_t = 5.0)]
    pub tolerance_m: f64,
    /// Report JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Text table (default: the report path with a `.txt` extension)
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Output directory for weights, log and report
    #[arg(long)]
    pub out: PathBuf,
    /// Acquisition configuration JSON
    #[arg(long)]
    pub acquisition: Option<PathBuf>,
    #[arg(long = "train-n", default_value_t = 7500)]
    pub train_n: usize,
    #[arg(long = "test-n", default_value_t = 1500)]
    pub test_n: usize,
    #[arg(long = "train-seed", default_value_t = 1)]
    pub train_seed: u64,
    #[arg(long = "test-seed", default_value_t = 2)]
    pub test_seed: u64,
    #[command(flatten)]
    pub cnn: CnnOverrides,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long, default_value_t = 5.0)]
    pub tolerance_m: f64,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Trace CSV
    #[arg(long)]
    pub trace: PathBuf,
    /// Trained weights JSON
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Route JSON; adds coordinates to each located fault
    #[arg(long)]
    pub route: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LocateArgs {
    /// Route JSON
    #[arg(long)]
    pub route: PathBuf,
    /// Fiber distance in metres
    #[arg(long, allow_hyphen_values = true)]
    pub distance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Dataset(a) => commands::dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Locate(a) => commands::locate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
