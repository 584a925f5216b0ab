use super::env::{Environment, Scenario, SlotInfo};
use super::policy::GaussianPolicy;
use super::{discounted_returns, gae};
use crate::nn::Mlp;
use crate::{rng_from_seed, Error, Result};

/// One team step: every UAV's local observation and sampled action, the
/// joint critic input and the shared reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observations: Vec<Vec<f64>>,
    pub critic_observation: Vec<f64>,
    /// Unclipped samples; the environment clips when mapping.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    pub info: SlotInfo,
}

/// One episode from one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub seed: u64,
    pub transitions: Vec<Transition>,
    advantages: Option<Vec<f64>>,
    returns: Option<Vec<f64>>,
}

impl RolloutBuffer {
    pub fn new(seed: u64, transitions: Vec<Transition>) -> Self {
        Self {
            seed,
            transitions,
            advantages: None,
            returns: None,
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Sum of the unscaled rewards.
    pub fn episode_qoe(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Computes advantages and critic targets on rewards multiplied by
    /// `reward_scale`. A trajectory that did not end in a terminal state is
    /// bootstrapped with `bootstrap`.
    pub fn finalize(&mut self, gamma: f64, lambda: f64, reward_scale: f64, bootstrap: f64) -> Result<()> {
        let rewards: Vec<f64> = self.transitions.iter().map(|t| t.reward * reward_scale).collect();
        let terminal = self.transitions.last().is_none_or(|t| t.done);
        let tail = if terminal { 0.0 } else { bootstrap };
        let mut values: Vec<f64> = self.transitions.iter().map(|t| t.value).collect();
        values.push(tail);
        self.advantages = Some(gae(&rewards, &values, gamma, lambda)?);
        let mut returns = discounted_returns(&rewards, gamma);
        if !terminal {
            let mut g = tail;
            for r in returns.iter_mut().rev() {
                g *= gamma;
                *r += g;
            }
        }
        self.returns = Some(returns);
        Ok(())
    }

    pub fn is_finalized(&self) -> bool {
        self.advantages.is_some()
    }

    pub fn advantages(&self) -> Result<&[f64]> {
        self.advantages
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("rollout buffer not finalized".into()))
    }

    pub fn returns(&self) -> Result<&[f64]> {
        self.returns
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("rollout buffer not finalized".into()))
    }
}

/// SplitMix64 finalizer over a pair of words; used to derive independent
/// per-episode and per-worker seeds from a master seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one episode with sampled actions.
pub fn run_episode(scenario: &Scenario, actor: &GaussianPolicy, critic: &Mlp, seed: u64) -> Result<RolloutBuffer> {
    let mut env = Environment::new(*scenario, derive_seed(seed, 0))?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let mut transitions = Vec::with_capacity(scenario.env.slots);
    while !env.is_done() {
        let observations = env.observations();
        let critic_observation = env.critic_observation(&observations);
        let value = critic.forward(&critic_observation)?[0];
        let mut actions = Vec::with_capacity(observations.len());
        let mut log_probs = Vec::with_capacity(observations.len());
        for o in &observations {
            let (a, lp) = actor.sample(o, &mut rng)?;
            actions.push(a);
            log_probs.push(lp);
        }
        let out = env.step(&actions)?;
        transitions.push(Transition {
            observations,
            critic_observation,
            actions,
            log_probs,
            reward: out.reward,
            value,
            done: out.done,
            info: out.info,
        });
    }
    Ok(RolloutBuffer::new(seed, transitions))
}

/// One worker thread per seed; worker `w` runs `episodes_per_worker`
/// episodes seeded from `seeds[w]`. The output is ordered by worker, then
/// episode, so it does not depend on thread scheduling.
pub fn collect_rollouts(
    scenario: &Scenario,
    actor: &GaussianPolicy,
    critic: &Mlp,
    seeds: &[u64],
    episodes_per_worker: usize,
) -> Result<Vec<RolloutBuffer>> {
    if seeds.is_empty() || episodes_per_worker == 0 {
        return Err(Error::EmptyInput("collect_rollouts needs seeds and episodes"));
    }
    let worker = |seed: u64| -> Result<Vec<RolloutBuffer>> {
        (0..episodes_per_worker as u64)
            .map(|e| run_episode(scenario, actor, critic, derive_seed(seed, e)))
            .collect()
    };
    let per_worker: Vec<Result<Vec<RolloutBuffer>>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds.iter().map(|&seed| s.spawn(move || worker(seed))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(seeds.len() * episodes_per_worker);
    for r in per_worker {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::env::{CodecConfig, EnvConfig};

    fn scenario() -> Scenario {
        Scenario {
            env: EnvConfig {
                slots: 6,
                ..EnvConfig::default()
            },
            codec: CodecConfig {
                h: 4,
                w: 4,
                codebook_size: 8,
                ..CodecConfig::default()
            },
            ..Scenario::default()
        }
    }

    fn nets(sc: &Scenario) -> (GaussianPolicy, Mlp) {
        let mut rng = rng_from_seed(0);
        let actor = GaussianPolicy::new(sc.observation_dim(), -0.7, &mut rng).unwrap();
        let critic = Mlp::standard(sc.critic_observation_dim(), 1, &mut rng).unwrap();
        (actor, critic)
    }

    #[test]
    fn rollouts_are_deterministic_and_union_of_workers() {
        let sc = scenario();
        let (actor, critic) = nets(&sc);
        let a = collect_rollouts(&sc, &actor, &critic, &[11], 2).unwrap();
        let b = collect_rollouts(&sc, &actor, &critic, &[11], 2).unwrap();
        assert_eq!(a, b);
        let all = collect_rollouts(&sc, &actor, &critic, &[1, 2, 3], 2).unwrap();
        let union: Vec<_> = [1, 2, 3]
            .iter()
            .flat_map(|&s| collect_rollouts(&sc, &actor, &critic, &[s], 2).unwrap())
            .collect();
        assert_eq!(all, union);
        assert!(all.iter().all(|r| r.len() == 6 && r.transitions.last().unwrap().done));
    }

    #[test]
    fn finalize_matches_direct_computation() {
        let sc = scenario();
        let (actor, critic) = nets(&sc);
        let mut buf = run_episode(&sc, &actor, &critic, 4).unwrap();
        assert!(buf.advantages().is_err());
        buf.finalize(0.9, 0.8, 0.5, 123.0).unwrap();
        let r: Vec<f64> = buf.transitions.iter().map(|t| 0.5 * t.reward).collect();
        assert_eq!(buf.returns().unwrap(), discounted_returns(&r, 0.9).as_slice());
        assert_eq!(buf.advantages().unwrap().len(), 6);
        for t in &buf.transitions {
            assert!(t.log_probs.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn truncated_trajectory_is_bootstrapped() {
        let sc = scenario();
        let (actor, critic) = nets(&sc);
        let mut buf = run_episode(&sc, &actor, &critic, 4).unwrap();
        buf.transitions.truncate(3);
        buf.transitions[2].done = false;
        buf.finalize(0.5, 1.0, 1.0, 8.0).unwrap();
        let r: Vec<f64> = buf.transitions.iter().map(|t| t.reward).collect();
        let want = r[2] + 0.5 * 8.0;
        assert!((buf.returns().unwrap()[2] - want).abs() < 1e-12);
    }
}
