//! `pothole`: detect, evaluate, synthesize and benchmark.

mod bench;
mod detect;
mod evaluate;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pothole_core::{Error, PipelineConfig};

/// Stereo road pothole detection.
#[derive(Debug, Parser)]
#[command(name = "pothole", version)]
struct Cli {
    /// Worker threads; bounds how many frames run in parallel.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect potholes in one rectified stereo pair.
    Detect {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for maps, point clouds and the manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted frames against ground-truth frames.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Error thresholds for the percentage of error pixels.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        eps: Vec<f64>,
        /// Minimum IoU for a correct instance.
        #[arg(long, default_value_t = 0.5)]
        iou_min: f64,
        /// Also write the JSON lines to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a batch of synthetic scenes.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 640)]
        width: usize,
        #[arg(long, default_value_t = 480)]
        height: usize,
        /// Intensity noise standard deviation.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Detect and evaluate every scene directory of a dataset.
    Bench {
        dataset_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        eps: Vec<f64>,
        /// Also write the JSON lines to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// key=value config file; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set delta_pd=0.35`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects key=value, got {kv:?}"))?;
            cfg.set(k, v)
                .map_err(|m| anyhow::anyhow!("--set {kv}: {m}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status: 0 success, 1 usage or I/O failure, 2 degenerate road model.
pub(crate) enum Outcome {
    Ok,
    Degenerate,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Some(n) = cli.workers {
        anyhow::ensure!(n >= 1, "--workers must be >= 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Detect {
            left,
            right,
            config,
            out,
        } => detect::run(
            &left,
            &right,
            config.config.as_deref(),
            &config.load()?,
            &out,
        ),
        Command::Eval {
            pred_dir,
            gt_dir,
            eps,
            iou_min,
            out,
        } => evaluate::run(&pred_dir, &gt_dir, &eps, iou_min, out.as_deref()),
        Command::Synth {
            count,
            seed,
            out,
            width,
            height,
            noise,
        } => synth::run(count, seed, &out, width, height, noise),
        Command::Bench {
            dataset_dir,
            config,
            eps,
            out,
        } => bench::run(&dataset_dir, &config.load()?, &eps, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Degenerate) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::DegenerateFit(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
