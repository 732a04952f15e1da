//! `iprim`: segment encounters, cluster interactions under the Procrustes
//! metric, and evaluate the resulting primitives.

mod artifact;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "iprim", version, about = "Interaction primitive clustering pipeline")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override keys of the configuration file.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Interaction or encounter CSV.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Samples per resampled interaction.
    #[arg(long, global = true)]
    grid_len: Option<usize>,
    /// Scale distance matrices so the largest entry is 1.
    #[arg(long, global = true)]
    normalize: Option<bool>,
    /// mds, geo1, geo2 or spline-coef.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    beta: Option<usize>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    anchor: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Order of the Wasserstein distance.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Candidate segmentation tolerances, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic encounter set and its ground truth.
    Generate(commands::GenerateArgs),
    /// Cut encounters into basic interactions.
    Segment,
    /// Pairwise Procrustes distance matrix.
    Distances,
    /// Cluster interactions with the configured method.
    Cluster,
    /// Quality report and silhouettes for a fitted model.
    Evaluate(commands::EvaluateArgs),
    /// Stability statistic over a two-parameter grid.
    Stability(commands::StabilityArgs),
    /// Wasserstein distance between two measures on interactions.
    Wasserstein(commands::WassersteinArgs),
    /// Assign interactions to the nearest primitive of a model.
    Transfer(commands::TransferArgs),
}

fn build_config(o: &Overrides) -> Result<PipelineConfig, CliError> {
    let mut c = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &o.$field {
                c.$field = v.clone();
            }
        )*};
    }
    set!(seed, output_dir, grid_len, normalize, method, k, beta, max_iter, anchor, restarts, r, epsilons);
    if o.input.is_some() {
        c.input = o.input.clone();
    }
    if o.cache_dir.is_some() {
        c.cache_dir = o.cache_dir.clone();
    }
    if o.workers.is_some() {
        c.workers = o.workers;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = build_config(&cli.overrides)?;
    if let Some(n) = config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(args) => commands::generate(&config, &args),
        Command::Segment => commands::segment(&config),
        Command::Distances => commands::distances(&config),
        Command::Cluster => commands::cluster(&config),
        Command::Evaluate(args) => commands::evaluate(&config, &args),
        Command::Stability(args) => commands::stability(&config, &args),
        Command::Wasserstein(args) => commands::wasserstein(&config, &args),
        Command::Transfer(args) => commands::transfer(&config, &args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iprim: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
