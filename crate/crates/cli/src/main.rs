//! `sirst`: dataset synthesis, training, detection, and evaluation from one
//! binary. Exit codes classify failures: 2 config, 3 i/o, 4 numeric.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use sirst_core::ErrorKind;

#[derive(Parser)]
#[command(name = "sirst", version, about = "Infrared small target detection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(commands::SynthArgs),
    /// Train the segmentation network on a dataset.
    Train(commands::TrainArgs),
    /// Run a detector over a dataset, writing maps, masks, and overlays.
    Detect(commands::DetectArgs),
    /// Score detections against ground truth.
    Eval(commands::EvalArgs),
    /// Sweep detection thresholds into an ROC curve.
    Roc(commands::RocArgs),
    /// Aggregate eval/roc runs into one table.
    Report(commands::ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::cmd_synth(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Detect(args) => commands::cmd_detect(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Roc(args) => commands::cmd_roc(args),
        Command::Report(args) => commands::cmd_report(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        let code = match err.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::Numeric => 4,
        };
        std::process::exit(code);
    }
}
