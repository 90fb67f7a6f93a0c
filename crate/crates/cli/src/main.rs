//! `gredit`: train node classifiers, capture anchor gradients, run editing
//! protocols, motivation curves and λ/K sweeps.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 data error,
//! 4 numerical failure.

mod commands;
mod config;
#[cfg(test)]
mod tests;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Run;
use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gredit", version, about = "Gradient-rewired editing of graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config leaf, e.g. `--set editing.lambda=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured architecture; writes a checkpoint, splits.json and train_curve.csv.
    Train(Common),
    /// Capture anchor gradients for a checkpoint.
    CaptureAnchors {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run the configured editing protocol; writes report.json, summary.csv and curves.csv.
    Edit {
        #[command(flatten)]
        common: Common,
        /// Trained checkpoint; the model is trained from the config when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Anchor directory; captured from the checkpoint when omitted.
        #[arg(long)]
        anchors: Option<PathBuf>,
    },
    /// GD editing curves (Grad_RMSE, training loss, target loss) for MLP, GCN and SAGE.
    Motivation(Common),
    /// λ × K sweep of the configured editor; writes pareto.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write a synthetic SBM graph directory (with splits.json).
    GenSbm(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Train(c) | Command::Motivation(c) | Command::GenSbm(c) => c,
            Command::CaptureAnchors { common, .. } | Command::Edit { common, .. } | Command::Sweep { common, .. } => {
                common
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<gredit::Error>() {
        Some(e) if e.is_data_error() => 3,
        Some(e) if e.is_numerical() => 4,
        Some(_) => 2,
        None => 1,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("GRE_NUM_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ConfigError(format!("GRE_NUM_THREADS: expected a positive integer, got '{raw}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let common = cli.command.common();
    let (mut config, mut snapshot) = ExperimentConfig::load(common.config.as_deref(), &common.overrides)?;
    commands::output_path(common.out.clone(), &mut config, &mut snapshot);
    let run = Run {
        config,
        snapshot,
        force: common.force,
    };
    match &cli.command {
        Command::Train(_) => commands::train(&run),
        Command::CaptureAnchors { checkpoint, .. } => commands::capture_anchors(&run, checkpoint),
        Command::Edit {
            checkpoint, anchors, ..
        } => commands::edit(&run, checkpoint.as_deref(), anchors.as_deref()),
        Command::Motivation(_) => commands::motivation(&run),
        Command::Sweep { checkpoint, .. } => commands::run_sweep(&run, checkpoint.as_deref()),
        Command::GenSbm(_) => commands::gen_sbm(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
