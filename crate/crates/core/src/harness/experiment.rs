//! Training, evaluation, sweep and codec-demo runs. Every run writes its
//! resolved config into the output directory before anything else.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::ExperimentConfig;
use super::export::{
    write_csv, CodecRow, CsvSink, EvalRow, SweepRow, TrainRow, CODEC_COLUMNS, EVAL_COLUMNS, SWEEP_COLUMNS,
    TRAIN_COLUMNS,
};
use crate::nn::Checkpoint;
use crate::ppo::{evaluate, summarize, Controller, EvalSummary, GaussianPolicy, IterationRecord, Scenario, Trainer};
use crate::vq::{gaussian_mixture_grid, quantize, Codebook};
use crate::{rng_from_seed, Error, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const TRAIN_FILE: &str = "train.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const CODEC_FILE: &str = "codec.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const ACTOR_CHECKPOINT: &str = "actor.ckpt";
pub const CRITIC_CHECKPOINT: &str = "critic.ckpt";

/// Evaluation episodes use seeds derived from this offset of the master
/// seed, so they never coincide with training rollouts.
const EVAL_SEED_OFFSET: u64 = 0xE7A1;

pub fn prepare_run_dir(out: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.save(&out.join(CONFIG_FILE))
}

pub fn eval_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.run.seed ^ EVAL_SEED_OFFSET
}

pub struct TrainOutcome {
    pub trainer: Trainer,
    pub records: Vec<IterationRecord>,
    pub actor_path: PathBuf,
}

/// Trains for `cfg.run.iterations`, appending one row per iteration to the
/// training CSV. `progress` sees each record as it is written.
pub fn run_training(
    cfg: &ExperimentConfig,
    out: &Path,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    prepare_run_dir(out, cfg)?;
    let ck_dir = out.join(CHECKPOINT_DIR);
    std::fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
    let mut trainer = Trainer::new(cfg.scenario(), cfg.ppo, cfg.run.seed)?;
    let mut sink = CsvSink::create(&out.join(TRAIN_FILE), TRAIN_COLUMNS)?;
    let mut records = Vec::with_capacity(cfg.run.iterations);
    for _ in 0..cfg.run.iterations {
        let rec = trainer.iterate(cfg.run.workers, cfg.run.episodes_per_worker)?;
        sink.push(&TrainRow::from(&rec))?;
        progress(&rec);
        let done = rec.iter + 1;
        if cfg.run.checkpoint_every > 0 && done % cfg.run.checkpoint_every == 0 && done < cfg.run.iterations {
            trainer
                .actor_checkpoint()
                .save(&ck_dir.join(format!("actor_iter{done}.ckpt")))?;
        }
        records.push(rec);
    }
    let actor_path = ck_dir.join(ACTOR_CHECKPOINT);
    trainer.actor_checkpoint().save(&actor_path)?;
    trainer.critic_checkpoint().save(&ck_dir.join(CRITIC_CHECKPOINT))?;
    Ok(TrainOutcome {
        trainer,
        records,
        actor_path,
    })
}

pub fn load_policy(path: &Path, scenario: &Scenario) -> Result<GaussianPolicy> {
    let policy = GaussianPolicy::from_checkpoint(&Checkpoint::load(path)?)?;
    if policy.net.input_dim() != scenario.observation_dim() {
        return Err(Error::DimensionMismatch {
            expected: scenario.observation_dim(),
            actual: policy.net.input_dim(),
        });
    }
    Ok(policy)
}

/// Mean and spread of the episode QoE plus per-episode diagnostics.
pub fn run_evaluation(
    controller: &dyn Controller,
    scenario: &Scenario,
    episodes: usize,
    seed: u64,
) -> Result<(EvalSummary, Vec<EvalRow>)> {
    let rows = evaluate(controller, scenario, seed, episodes)?;
    Ok((summarize(&rows)?, rows))
}

pub fn write_evaluation(out: &Path, rows: &[EvalRow]) -> Result<()> {
    write_csv(&out.join(EVAL_FILE), EVAL_COLUMNS, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Bandwidth,
    RicianFactor,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Bandwidth => "bandwidth",
            SweepParam::RicianFactor => "rician_factor",
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepParam::Bandwidth => cfg.channel.bandwidth_hz = value,
            SweepParam::RicianFactor => cfg.channel.rician_factor = value,
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandwidth" | "bandwidth_hz" => Ok(SweepParam::Bandwidth),
            "rician" | "rician_factor" => Ok(SweepParam::RicianFactor),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep parameter {other:?}; expected bandwidth or rician_factor"
            ))),
        }
    }
}

pub fn sweep_file(param: SweepParam) -> String {
    format!("sweep_{}.csv", param.name())
}

/// Evaluates the same controller on the same episode seeds at every value.
pub fn run_sweep(
    controller: &dyn Controller,
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    let episodes = cfg.run.eval_episodes;
    values
        .iter()
        .map(|&v| {
            let mut c = *cfg;
            param.apply(&mut c, v);
            c.validate()?;
            let (s, _) = run_evaluation(controller, &c.scenario(), episodes, eval_seed(cfg))?;
            Ok(SweepRow {
                param: param.name().to_string(),
                value: v,
                mean_qoe: s.mean,
                std_qoe: s.std,
                episodes: s.episodes,
            })
        })
        .collect()
}

pub fn write_sweep(out: &Path, param: SweepParam, rows: &[SweepRow]) -> Result<PathBuf> {
    let path = out.join(sweep_file(param));
    write_csv(&path, SWEEP_COLUMNS, rows)?;
    Ok(path)
}

/// Number of mixture components and codebook entries in the codec demo.
pub const CODEC_DEMO_CLUSTERS: usize = 4;

/// EMA codebook learning on a four-component Gaussian mixture in two
/// dimensions. Each step quantizes a fresh batch and updates the codebook;
/// distortion is measured on a fixed held-out grid. Row 0 is the initial
/// codebook.
pub fn codec_demo(cfg: &ExperimentConfig, steps: usize) -> Result<Vec<CodecRow>> {
    let mut rng = rng_from_seed(cfg.run.seed);
    let centers = vec![vec![3.0, 3.0], vec![-3.0, 3.0], vec![3.0, -3.0], vec![-3.0, -3.0]];
    let (h, w) = (cfg.codec.h, cfg.codec.w);
    let held_out = gaussian_mixture_grid(&mut rng, h, w, &centers, 0.3)?;
    let mut cb = Codebook::random(
        &mut rng,
        CODEC_DEMO_CLUSTERS,
        2,
        cfg.codec.ema_decay,
        cfg.codec.smoothing_eps,
    )?;
    let mut rows = vec![CodecRow {
        step: 0,
        distortion: cb.distortion(&held_out)?,
    }];
    for step in 1..=steps {
        let batch = gaussian_mixture_grid(&mut rng, h, w, &centers, 0.3)?;
        let (idx, _) = quantize(&batch, &cb)?;
        cb.ema_update(&batch, &idx)?;
        rows.push(CodecRow {
            step,
            distortion: cb.distortion(&held_out)?,
        });
    }
    Ok(rows)
}

pub fn write_codec_demo(out: &Path, rows: &[CodecRow]) -> Result<()> {
    write_csv(&out.join(CODEC_FILE), CODEC_COLUMNS, rows)
}
