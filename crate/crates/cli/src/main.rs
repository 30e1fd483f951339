//! `pmc` — one-shot gesture recognition over motion-map bags.
//!
//! Subcommands cover the whole pipeline: `synth` writes a synthetic batch,
//! `train` fits one PCA model per gesture, `segment` splits multi-gesture
//! test videos, `classify` predicts label sequences (automatic or manual
//! segmentation), `score` evaluates predictions with the normalized
//! Levenshtein metric, and `dump` exports motion maps or principal
//! components as CSV.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ParamArgs;

#[derive(Parser)]
#[command(name = "pmc", version, about = "One-shot gesture recognition from motion maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one PCA model per gesture from a batch manifest.
    Train(TrainArgs),
    /// Predict label sequences for a manifest's test videos.
    Classify(ClassifyArgs),
    /// Split test videos into single-gesture spans.
    Segment(SegmentArgs),
    /// Score predictions against the manifest's truth labels.
    Score(ScoreArgs),
    /// Generate a synthetic batch with known ground truth.
    Synth(SynthArgs),
    /// Dump motion maps or model components as CSV.
    #[command(subcommand)]
    Dump(DumpCommand),
}

#[derive(Args)]
struct TrainArgs {
    /// Batch manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Output vocabulary file (JSON).
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Trained vocabulary (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Batch manifest naming the test videos.
    #[arg(long)]
    manifest: PathBuf,
    /// `auto` or `manual:<spans.json>`.
    #[arg(long, default_value = "auto")]
    segmentation: String,
    /// Output predictions file (JSON).
    #[arg(long, short)]
    out: PathBuf,
    /// Worker pool size for test videos.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct SegmentArgs {
    /// Batch manifest naming training and test videos.
    #[arg(long)]
    manifest: PathBuf,
    /// Output spans file (JSON).
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct ScoreArgs {
    /// Batch manifest with truth labels.
    #[arg(long)]
    manifest: PathBuf,
    /// Predictions file written by `classify`.
    #[arg(long)]
    predictions: PathBuf,
    /// Output report file (JSON); a one-line TSV summary goes to stdout.
    #[arg(long, short)]
    out: PathBuf,
    /// Wall time in seconds to record in the report (e.g. measured around
    /// the whole batch run); defaults to the scoring time.
    #[arg(long)]
    wall_time: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synth spec file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output batch directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Override the spec's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum DumpCommand {
    /// Dump a video's bag of motion maps as CSV, one row per map.
    MotionMaps(DumpMotionArgs),
    /// Dump a model's top principal components as CSV grids.
    Components(DumpComponentsArgs),
}

#[derive(Args)]
struct DumpMotionArgs {
    /// Video directory (frame_NNNNN.pgm files).
    video: PathBuf,
    /// Output CSV file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct DumpComponentsArgs {
    /// Trained vocabulary (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Gesture label to dump.
    #[arg(long)]
    label: u32,
    /// Number of top components.
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Output path prefix (`<prefix>_c<k>.csv`); stdout when omitted.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

/// Error carrying the intended process exit code.
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        CliError::Usage(e.into())
    }

    fn runtime(e: impl Into<anyhow::Error>) -> Self {
        CliError::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Classify(args) => commands::classify(args),
        Command::Segment(args) => commands::segment(args),
        Command::Score(args) => commands::score(args),
        Command::Synth(args) => commands::synth(args),
        Command::Dump(DumpCommand::MotionMaps(args)) => commands::dump_motion_maps(args),
        Command::Dump(DumpCommand::Components(args)) => commands::dump_components(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
