//! `nflab` — train, evaluate, and render neural fields from a JSON
//! run configuration.
//!
//! Exit codes: 0 on success, 2 for configuration and domain errors,
//! 3 for runtime failures (I/O, malformed files, numeric blowups).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nflab_cli::commands;
use nflab_cli::config::RunConfig;
use nflab_core::Error;

#[derive(Parser)]
#[command(
    name = "nflab",
    version,
    about = "Neural fields over images and signed-distance scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides training.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads where a command parallelizes (rendering); 0
    /// keeps the single-threaded deterministic default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl CommonArgs {
    fn resolved(&self) -> Result<RunConfig, Error> {
        commands::load_resolved(&self.config, self.seed, self.out.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured model; writes checkpoint, loss CSV, and the
    /// resolved config.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score a checkpoint against the configured task (PSNR/SSIM or
    /// IoU and mean |sdf error|).
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint to score; defaults to <output dir>/model.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sphere-trace a checkpoint (or the analytic scene) to an image.
    Render {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint to render; omit to render the configured scene.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print trainable-parameter counts for the configured model.
    Budget {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { common } => commands::train(&common.resolved()?),
        Command::Eval { common, checkpoint } => commands::eval(&common.resolved()?, checkpoint),
        Command::Render { common, checkpoint } => {
            commands::render_cmd(&common.resolved()?, checkpoint, common.threads)
        }
        Command::Budget { common } => commands::budget(&common.resolved()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
