//! Multi-user PPO: one Gaussian actor shared by every UAV on its local
//! observation, one central critic on the joint observation, and a single
//! team reward per slot.

pub mod env;
pub mod policy;
pub mod rollout;
pub mod trainer;
pub mod update;

pub use env::{Environment, Scenario, SlotInfo, StepOutcome, ACTION_DIM};
pub use policy::{Controller, GaussianPolicy, MeanAction, UniformRandom};
pub use rollout::{collect_rollouts, derive_seed, run_episode, RolloutBuffer, Transition};
pub use trainer::{evaluate, summarize, EpisodeSummary, EvalSummary, IterationRecord, Trainer};
pub use update::{ppo_update, ActorSample, CriticSample, Optimizers, UpdateStats};

use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub normalize_advantages: bool,
    pub log_std_init: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Rewards are multiplied by this before returns and advantages.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            entropy_coef: 0.01,
            learning_rate: 5e-4,
            epochs: 4,
            minibatch: 64,
            normalize_advantages: true,
            log_std_init: 0.5f64.ln(),
            log_std_min: -5.0,
            log_std_max: 2.0,
            reward_scale: 0.01,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("ppo: {what}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must lie in (0, 1]");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("need learning_rate > 0 and entropy_coef >= 0");
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return bad("epochs and minibatch must be >= 1");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale must be > 0");
        }
        if !(self.log_std_min < self.log_std_max) {
            return bad("need log_std_min < log_std_max");
        }
        Ok(())
    }
}

/// `R_t = sum_{t' >= t} gamma^(t'-t) r_t'`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// Generalized advantage estimates. `values` carries one extra bootstrap
/// entry (0 for a finished episode).
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::LengthMismatch(format!(
            "{} rewards need {} values, got {}",
            rewards.len(),
            rewards.len() + 1,
            values.len()
        )));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        acc = delta + gamma * lambda * acc;
        out[t] = acc;
    }
    Ok(out)
}

/// `min(r A, g(eps, A))` with `g = (1+eps) A` for `A >= 0`, else `(1-eps) A`.
pub fn clip_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let bound = if advantage >= 0.0 {
        (1.0 + eps) * advantage
    } else {
        (1.0 - eps) * advantage
    };
    (ratio * advantage).min(bound)
}

/// True when the unclipped term is the active branch of [`clip_objective`],
/// i.e. the gradient flows through the ratio.
pub fn clip_is_inactive(ratio: f64, advantage: f64, eps: f64) -> bool {
    if advantage >= 0.0 {
        ratio <= 1.0 + eps
    } else {
        ratio >= 1.0 - eps
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Log density of a diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

pub fn entropy(log_std: &[f64]) -> f64 {
    let per_dim = 0.5 * (2.0 * PI * E).ln();
    log_std.iter().map(|ls| per_dim + ls).sum()
}

pub fn critic_loss(values: &[f64], returns: &[f64]) -> Result<f64> {
    if values.len() != returns.len() {
        return Err(Error::LengthMismatch(format!(
            "{} values vs {} returns",
            values.len(),
            returns.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("critic_loss batch"));
    }
    Ok(values.iter().zip(returns).map(|(v, r)| (v - r).powi(2)).sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_examples() {
        assert_eq!(discounted_returns(&[1.0, 1.0], 0.5), vec![1.5, 1.0]);
        assert_eq!(discounted_returns(&[0.0; 4], 0.9), vec![0.0; 4]);
        // gamma must be > 0 for training, the limit still holds numerically
        assert_eq!(discounted_returns(&[3.0, -1.0, 2.0], 0.0), vec![3.0, -1.0, 2.0]);
    }

    #[test]
    fn gae_examples() {
        assert_eq!(gae(&[1.0], &[0.0, 0.0], 0.99, 0.95).unwrap(), vec![1.0]);
        assert_eq!(gae(&[1.0, 1.0], &[0.5, 0.5, 0.0], 1.0, 1.0).unwrap(), vec![1.5, 0.5]);
        let g = 0.9;
        let values = [3.0, 2.0, 1.0, 0.0];
        let rewards: Vec<f64> = (0..3).map(|t| values[t] - g * values[t + 1]).collect();
        assert!(gae(&rewards, &values, g, 0.7).unwrap().iter().all(|a| a.abs() < 1e-12));
        assert!(gae(&[1.0], &[0.0], 0.9, 0.9).is_err());
    }

    #[test]
    fn clip_examples() {
        assert!((clip_objective(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clip_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
        for r in [0.8, 0.9, 1.0, 1.1, 1.2] {
            for a in [-2.0, -0.1, 0.0, 0.3, 5.0] {
                assert_eq!(clip_objective(r, a, 0.2), r * a);
            }
        }
    }

    #[test]
    fn log_prob_and_entropy_examples() {
        assert!((gaussian_log_prob(&[0.3], &[0.0], &[0.3]) + 0.9189385332046727).abs() < 1e-15);
        assert!((gaussian_log_prob(&[0.0], &[0.0], &[1.0]) + 0.9189385332046727 + 0.5).abs() < 1e-15);
        let lp = gaussian_log_prob(&[0.1, -0.2], &[-0.3, 0.4], &[0.5, 0.5]);
        assert_eq!((lp - lp).exp(), 1.0);
        assert!((entropy(&[0.0]) - 1.4189385332046727).abs() < 1e-15);
        let ls = [0.1, -0.7, 0.3];
        let doubled: Vec<f64> = ls.iter().map(|x| x + 2f64.ln()).collect();
        assert!((entropy(&doubled) - entropy(&ls) - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[]), 0.0);
    }

    #[test]
    fn critic_loss_examples() {
        assert_eq!(critic_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(critic_loss(&[0.0], &[2.0]).unwrap(), 4.0);
        assert_eq!(critic_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(critic_loss(&[1.0], &[]).is_err());
        assert!(critic_loss(&[], &[]).is_err());
    }
}
