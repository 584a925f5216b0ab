//! Command-line front end. `run` returns the process exit code.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, Overrides};
use super::experiment::{
    codec_demo, eval_seed, load_policy, prepare_run_dir, run_evaluation, run_sweep, run_training, write_codec_demo,
    write_evaluation, write_sweep, SweepParam,
};
use super::selftest;
use crate::ppo::{Controller, MeanAction, UniformRandom};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "semstream", version, about = "Multi-UAV semantic video streaming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; missing keys keep their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Parallel rollout workers per training iteration.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "runs/latest")]
    out: PathBuf,
}

impl Common {
    fn resolve(&self, iterations: Option<usize>) -> Result<ExperimentConfig> {
        let overrides = Overrides {
            seed: self.seed,
            episodes: self.episodes,
            workers: self.workers,
            iterations,
        };
        ExperimentConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the allocator and write train.csv plus checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Evaluate a frozen policy (uniform-random commands without --checkpoint).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a frozen policy over a grid of one channel parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// bandwidth or rician_factor.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// EMA codebook learning on a Gaussian mixture; writes codec.csv.
    CodecDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Run the built-in oracle and invariant checks.
    Selftest,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConfigRead { .. } => EXIT_CONFIG,
        Error::InvalidParameter(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn controller_for(checkpoint: &Option<PathBuf>, cfg: &ExperimentConfig) -> Result<Option<crate::ppo::GaussianPolicy>> {
    match checkpoint {
        Some(p) => Ok(Some(load_policy(p, &cfg.scenario())?)),
        None => {
            eprintln!("no --checkpoint given; using uniform-random commands");
            Ok(None)
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Train { common, iterations } => {
            let cfg = common.resolve(iterations)?;
            let total = cfg.run.iterations;
            let out = run_training(&cfg, &common.out, |r| {
                if r.iter % 20 == 0 || r.iter + 1 == total {
                    eprintln!(
                        "iter {:>4}/{total}  mean_qoe {:>10.3}  clip {:.3}  entropy {:.3}",
                        r.iter + 1,
                        r.mean_qoe,
                        r.stats.clip_fraction,
                        r.stats.entropy
                    );
                }
            })?;
            println!(
                "trained {} iterations; checkpoint {}",
                out.records.len(),
                out.actor_path.display()
            );
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.resolve(None)?;
            let policy = controller_for(&checkpoint, &cfg)?;
            let controller: &dyn Controller = match &policy {
                Some(p) => &MeanAction(p),
                None => &UniformRandom,
            };
            prepare_run_dir(&common.out, &cfg)?;
            let (summary, rows) = run_evaluation(controller, &cfg.scenario(), cfg.run.eval_episodes, eval_seed(&cfg))?;
            write_evaluation(&common.out, &rows)?;
            println!(
                "qoe {:.4} +/- {:.4} over {} episodes",
                summary.mean, summary.std, summary.episodes
            );
        }
        Command::Sweep {
            common,
            checkpoint,
            param,
            values,
        } => {
            let param: SweepParam = param.parse()?;
            let cfg = common.resolve(None)?;
            let policy = controller_for(&checkpoint, &cfg)?;
            let controller: &dyn Controller = match &policy {
                Some(p) => &MeanAction(p),
                None => &UniformRandom,
            };
            prepare_run_dir(&common.out, &cfg)?;
            let rows = run_sweep(controller, &cfg, param, &values)?;
            let path = write_sweep(&common.out, param, &rows)?;
            for r in &rows {
                println!("{} = {}: qoe {:.4} +/- {:.4}", r.param, r.value, r.mean_qoe, r.std_qoe);
            }
            println!("wrote {}", path.display());
        }
        Command::CodecDemo { common, steps } => {
            let cfg = common.resolve(None)?;
            prepare_run_dir(&common.out, &cfg)?;
            let rows = codec_demo(&cfg, steps)?;
            write_codec_demo(&common.out, &rows)?;
            let (first, last) = (rows[0].distortion, rows[rows.len() - 1].distortion);
            println!("distortion {first:.6} -> {last:.6} after {steps} steps");
        }
        Command::Selftest => {
            let ok = selftest::run(&mut std::io::stdout()).map_err(|e| Error::io("<stdout>", e))?;
            return Ok(if ok { EXIT_OK } else { EXIT_FAILURE });
        }
    }
    Ok(EXIT_OK)
}
