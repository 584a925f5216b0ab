use super::env::{Environment, Scenario};
use super::policy::{Controller, GaussianPolicy};
use super::rollout::{collect_rollouts, derive_seed};
use super::update::{ppo_update, Optimizers, UpdateStats};
use super::PpoConfig;
use crate::nn::{Checkpoint, Mlp};
use crate::{rng_from_seed, Error, Result, SimRng};

/// One training iteration: rollouts from every worker, then one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub episodes: usize,
    pub mean_qoe: f64,
    pub stats: UpdateStats,
}

pub struct Trainer {
    pub scenario: Scenario,
    pub cfg: PpoConfig,
    pub actor: GaussianPolicy,
    pub critic: Mlp,
    pub opt: Optimizers,
    seed: u64,
    iteration: usize,
    shuffle_rng: SimRng,
}

impl Trainer {
    pub fn new(scenario: Scenario, cfg: PpoConfig, seed: u64) -> Result<Self> {
        scenario.validate()?;
        cfg.validate()?;
        let mut init = rng_from_seed(derive_seed(seed, 0x1417));
        let actor = GaussianPolicy::new(scenario.observation_dim(), cfg.log_std_init, &mut init)?;
        let critic = Mlp::standard(scenario.critic_observation_dim(), 1, &mut init)?;
        let opt = Optimizers::new(&actor, &critic, cfg.learning_rate);
        Ok(Self {
            scenario,
            cfg,
            actor,
            critic,
            opt,
            seed,
            iteration: 0,
            shuffle_rng: rng_from_seed(derive_seed(seed, 0x5eed)),
        })
    }

    /// Restores networks and optimizer state from checkpoints.
    pub fn resume(&mut self, actor: &Checkpoint, critic: &Checkpoint) -> Result<()> {
        let policy = GaussianPolicy::from_checkpoint(actor)?;
        if policy.net.sizes() != self.actor.net.sizes() || critic.net.sizes() != self.critic.sizes() {
            return Err(Error::ShapeMismatch("checkpoint network shape differs from the scenario".into()));
        }
        self.actor = policy;
        self.critic = critic.net.clone();
        self.opt = Optimizers {
            actor: actor.optimizer.clone(),
            critic: critic.optimizer.clone(),
        };
        Ok(())
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Worker seeds used by the current iteration.
    pub fn worker_seeds(&self, workers: usize) -> Vec<u64> {
        let base = derive_seed(self.seed, 0x1000 + self.iteration as u64);
        (0..workers as u64).map(|w| derive_seed(base, w)).collect()
    }

    pub fn iterate(&mut self, workers: usize, episodes_per_worker: usize) -> Result<IterationRecord> {
        let seeds = self.worker_seeds(workers);
        let mut buffers = collect_rollouts(&self.scenario, &self.actor, &self.critic, &seeds, episodes_per_worker)?;
        for b in &mut buffers {
            b.finalize(self.cfg.gamma, self.cfg.gae_lambda, self.cfg.reward_scale, 0.0)?;
        }
        let mean_qoe = buffers.iter().map(|b| b.episode_qoe()).sum::<f64>() / buffers.len() as f64;
        let stats = ppo_update(
            &buffers,
            &mut self.actor,
            &mut self.critic,
            &mut self.opt,
            &self.cfg,
            &mut self.shuffle_rng,
        )?;
        let record = IterationRecord {
            iter: self.iteration,
            episodes: buffers.len(),
            mean_qoe,
            stats,
        };
        self.iteration += 1;
        Ok(record)
    }

    pub fn actor_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.actor.net.clone(),
            extra: self.actor.log_std.clone(),
            optimizer: self.opt.actor.clone(),
        }
    }

    pub fn critic_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.critic.clone(),
            extra: Vec::new(),
            optimizer: self.opt.critic.clone(),
        }
    }
}

/// Per-episode evaluation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub qoe: f64,
    /// Mean downlink rate over UAVs and slots, bit/s.
    pub mean_rate: f64,
    pub mean_recovery_acc: f64,
    /// Total rebuffering time, s.
    pub rebuffer_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub mean: f64,
    /// Population standard deviation of the episode QoE.
    pub std: f64,
    pub episodes: usize,
}

/// Runs `episodes` episodes; episode `e` uses environment seed
/// `derive_seed(seed, e)` regardless of the controller, so different
/// controllers face identical initial positions, channels and content.
pub fn evaluate(controller: &dyn Controller, scenario: &Scenario, seed: u64, episodes: usize) -> Result<Vec<EpisodeSummary>> {
    if episodes == 0 {
        return Err(Error::InvalidParameter("evaluation needs at least one episode".into()));
    }
    (0..episodes)
        .map(|e| {
            let episode_seed = derive_seed(seed, e as u64);
            let mut env = Environment::new(*scenario, derive_seed(episode_seed, 0))?;
            let mut rng = rng_from_seed(derive_seed(episode_seed, 1));
            let (mut qoe, mut rate, mut acc, mut rebuf) = (0.0, 0.0, 0.0, 0.0);
            let mut slots = 0usize;
            while !env.is_done() {
                let obs = env.observations();
                let commands = controller.commands(&obs, &mut rng)?;
                let out = env.step(&commands)?;
                qoe += out.reward;
                rate += out.info.mean_rate;
                acc += out.info.recovery_accuracy;
                rebuf += out.info.rebuffer_s;
                slots += 1;
            }
            Ok(EpisodeSummary {
                episode: e,
                qoe,
                mean_rate: rate / slots as f64,
                mean_recovery_acc: acc / slots as f64,
                rebuffer_s: rebuf,
            })
        })
        .collect()
}

pub fn summarize(rows: &[EpisodeSummary]) -> Result<EvalSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("summary of zero episodes"));
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.qoe).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.qoe - mean).powi(2)).sum::<f64>() / n;
    Ok(EvalSummary {
        mean,
        std: var.sqrt(),
        episodes: rows.len(),
    })
}
