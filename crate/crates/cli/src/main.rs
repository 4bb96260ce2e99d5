//! Command-line surface for the panorama synthesis toolkit: scene
//! generation, 360° depth estimation, visibility-aware rendering and
//! cube-map conversion.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 IO error, 4 numerical
//! failure (NaN/Inf detected in outputs).

mod commands;
mod config;
mod error;
mod manifest;

use clap::{Parser, Subcommand};
use commands::{cmd_convert, cmd_depth, cmd_render, cmd_synth, ConvertArgs};
use config::{Overrides, RunConfig};
use error::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "panosynth",
    about = "Wide-baseline panorama synthesis: oracle scenes, sphere-sweep depth, spherical rendering",
    version
)]
struct Cli {
    /// JSON configuration file; flags override individual keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write ground-truth panoramas and spherical depth maps for a scene.
    Synth,
    /// Estimate the reference view's spherical depth by sphere sweeping.
    Depth,
    /// Render a novel panorama from the source views and evaluate it.
    Render,
    /// Convert between equirectangular panoramas and cube maps.
    Convert(ConvertArgs),
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.fill_derived();
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(cfg: &RunConfig) -> usize {
    if cfg.threads > 0 {
        return cfg.threads;
    }
    std::env::var("PANOSYNTH_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    let threads = thread_count(&cfg);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Depth => cmd_depth(&cfg),
        Command::Render => cmd_render(&cfg),
        Command::Convert(args) => cmd_convert(&cfg, args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
