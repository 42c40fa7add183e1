use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fvg_core::pipeline::{parse_grid, parse_list, run, RunConfig};
use fvg_core::{Error, ErrorCategory};

const CACHE_FILE: &str = "fvg-cache.fvgc";

/// Rotation estimation between spherical images from masked spherical moments.
#[derive(Debug, Parser)]
#[command(name = "fvg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the coefficient table and mask banks and write the cache.
    Precompute,
    /// Render a synthetic dataset into --out.
    GenData {
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        #[arg(long, default_value_t = 500)]
        frames: usize,
        /// Largest per-frame rotation, degrees.
        #[arg(long, default_value_t = 5.0)]
        max_step: f64,
    },
    /// Estimate per-pair rotations for every (cutoff, range) configuration.
    Estimate,
    /// Train the refinement network on the dataset.
    Train {
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
    },
    /// Compare the analytical configurations and the trained model on held-out pairs.
    Eval {
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
    },
    /// Time each pipeline stage on synthetic frames.
    Bench {
        #[arg(long, default_value_t = 100)]
        frames: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Spherical-harmonic bandwidth L.
    #[arg(long, global = true, default_value_t = 32)]
    bandwidth: usize,
    /// Equirectangular grid, HxW.
    #[arg(long, global = true, default_value = "128x256")]
    grid: String,
    /// Number of masks per bank.
    #[arg(long, global = true, default_value_t = 100)]
    masks: usize,
    /// Comma-separated mask ranges.
    #[arg(long, global = true, default_value = "0.1,0.2,0.3,0.4,0.5")]
    ranges: String,
    /// Comma-separated low-pass cutoffs.
    #[arg(long, global = true, default_value = "8,32")]
    cutoffs: String,
    /// Only the upper hemisphere is visible.
    #[arg(long, global = true)]
    half_sphere: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "fvg-out")]
    out: PathBuf,
    /// Cache file; defaults to fvg-cache.fvgc inside $FVG_CACHE_DIR or the
    /// working directory.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true, default_value = "fvg-model.json")]
    model: PathBuf,
    /// Dataset directory read by estimate, train and eval.
    #[arg(long, global = true, default_value = "fvg-data")]
    data: PathBuf,
    /// Rotation estimator: corotated or kabsch.
    #[arg(long, global = true, default_value = "corotated")]
    estimator: String,
    /// Mask centre layout: icosahedral or fibonacci.
    #[arg(long, global = true, default_value = "icosahedral")]
    layout: String,
    /// Mask profile fitter: least-squares or taylor.
    #[arg(long, global = true, default_value = "least-squares")]
    fitter: String,
    #[arg(long, env = "FVG_CACHE_DIR", hide_env_values = true, hide = true)]
    cache_dir: Option<PathBuf>,
}

fn config(cli: Cli) -> Result<RunConfig, Error> {
    let c = cli.common;
    let mut cfg = RunConfig {
        bandwidth: c.bandwidth,
        grid: parse_grid(&c.grid)?,
        masks: c.masks,
        ranges: parse_list(&c.ranges)?,
        cutoffs: parse_list(&c.cutoffs)?,
        half_sphere: c.half_sphere,
        seed: c.seed,
        threads: c.threads,
        out: c.out,
        cache: c
            .cache
            .unwrap_or_else(|| c.cache_dir.map_or_else(|| CACHE_FILE.into(), |d| d.join(CACHE_FILE))),
        model: c.model,
        data: c.data,
        estimator: c.estimator,
        layout: c.layout,
        ..RunConfig::default()
    };
    cfg.fit.fitter = c.fitter;
    cfg.train.seed = c.seed;
    cfg.command = match cli.command {
        Command::Precompute => "precompute",
        Command::GenData {
            scenes,
            frames,
            max_step,
        } => {
            cfg.scenes = scenes;
            cfg.frames = frames;
            cfg.max_step_deg = max_step;
            "gen-data"
        }
        Command::Estimate => "estimate",
        Command::Train {
            epochs,
            batch_size,
            lr,
            test_fraction,
        } => {
            cfg.train.epochs = epochs;
            cfg.train.batch_size = batch_size;
            cfg.train.learning_rate = lr;
            cfg.test_fraction = test_fraction;
            "train"
        }
        Command::Eval { test_fraction } => {
            cfg.test_fraction = test_fraction;
            "eval"
        }
        Command::Bench { frames } => {
            cfg.bench_frames = frames;
            "bench"
        }
    }
    .into();
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = config(cli).and_then(|cfg| {
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        run(&cfg)
    });
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
