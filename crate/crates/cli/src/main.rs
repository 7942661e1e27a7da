mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::UsageError;

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\ncommit: ",
    env!("FSWAD_BUILD_COMMIT"),
    "\ntarget: ",
    env!("FSWAD_BUILD_TARGET"),
    "\nprofile: ",
    env!("FSWAD_BUILD_PROFILE"),
);

#[derive(Parser)]
#[command(name = "fswad", version, long_version = LONG_VERSION)]
#[command(about = "Few-shot weakly-supervised anomaly detection on tabular data")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct Global {
    /// Flat key-value TOML file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Subcommand)]
pub enum Command {
    /// Load and encode a raw dataset into a binary (optionally CSV) dump.
    Prepare(commands::PrepareArgs),
    /// Draw disjoint SampleSets with train/test splits and write manifests.
    Sample(commands::SampleArgs),
    /// Draw one augmented training batch from a SampleSet.
    Augment(commands::AugmentArgs),
    /// Train a scoring model on one SampleSet.
    Train(commands::TrainArgs),
    /// Score the test split of a SampleSet with a trained model.
    Score(commands::ScoreArgs),
    /// Compute AUROC and confusion counts from a scores file.
    Eval(commands::EvalArgs),
    /// Run a full experiment (sweep × SampleSets × methods).
    Experiment(commands::ExperimentArgs),
    /// Reservoir-sample a class-balanced subset from large headed CSVs.
    Extract(commands::ExtractArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<fswad_core::Error>(),
                    Some(fswad_core::Error::InvalidConfig(_))
                );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
