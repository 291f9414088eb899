//! `reefmap` — point predictions to coarse segmentation labels, training
//! datasets, evaluation and reef analytics.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid input, 4 inconsistent data,
//! 5 I/O.

mod commands;
mod config;
mod stage;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::{load_catalog, PipelineConfig};
use reefmap::ErrorKind;
use stage::Workspace;

#[derive(Parser, Debug)]
#[command(name = "reefmap", version, about = "Coarse reef habitat labels from georeferenced point predictions")]
struct Cli {
    /// Work directory; outputs go to `<workdir>/run/<stage>/`
    #[arg(long, global = true, env = "REEF_WORKDIR")]
    workdir: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON pipeline configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `default5`, `default6` or a catalog JSON file
    #[arg(long, global = true)]
    catalog: Option<String>,
    /// Re-run stages even when their recorded outputs are current
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a point-CSV and store it in canonical local coordinates
    Ingest(commands::IngestArgs),
    /// Median distance between consecutive survey points
    Spacing(commands::SpacingArgs),
    /// Interpolate per-class probabilities onto a grid
    Rasterize(commands::RasterizeArgs),
    /// Per-class percentile normalization of the probability rasters
    Normalize(commands::NormalizeArgs),
    /// Argmax of the normalized rasters into a label raster
    Label,
    /// Nearest-neighbour alignment of labels onto a finer grid
    Upsample(commands::UpsampleArgs),
    /// Cut labels into training tiles (round 0 of a dataset)
    Tile(commands::TileArgs),
    /// Accuracy, IoU and confusion matrices against ground truth
    Evaluate(commands::EvaluateArgs),
    /// Class cover, instances, lengths and densities
    Analyze(commands::AnalyzeArgs),
    /// Self-distillation rounds
    Distill {
        #[command(subcommand)]
        command: commands::DistillCommand,
    },
    /// Generate a synthetic survey scene with known ground truth
    Synth(commands::SynthArgs),
    /// Summarize the work directory
    Report,
}

/// A problem with how the command was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<reefmap::Error>() {
            return match e.kind() {
                ErrorKind::Validation => 3,
                ErrorKind::Inconsistency => 4,
                ErrorKind::Io => 5,
            };
        }
        if cause.is::<std::io::Error>() {
            return 5;
        }
    }
    3
}

fn run(cli: Cli) -> Result<()> {
    let config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.workers.or(config.workers).filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let catalog = load_catalog(cli.catalog.as_deref().or(config.catalog.as_deref()))?;
    let root = cli.workdir.clone().or_else(|| config.workdir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx { ws: Workspace { root, force: cli.force }, config, catalog };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Spacing(a) => commands::spacing(&ctx, a),
        Command::Rasterize(a) => commands::rasterize(&ctx, a),
        Command::Normalize(a) => commands::normalize(&ctx, a),
        Command::Label => commands::label(&ctx),
        Command::Upsample(a) => commands::upsample(&ctx, a),
        Command::Tile(a) => commands::tile(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Analyze(a) => commands::analyze(&ctx, a),
        Command::Distill { command } => commands::distill(&ctx, command),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let e = anyhow::Error::from(reefmap::Error::GridMismatch);
        assert_eq!(exit_code(&e), 4);
        let e = anyhow::Error::from(reefmap::Error::EmptyFile).context("parsing x");
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::from(std::io::Error::other("disk"));
        assert_eq!(exit_code(&e), 5);
        assert_eq!(exit_code(&anyhow::Error::from(UsageError("x".into()))), 2);
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
