use rand::Rng;
use rand_distr::StandardNormal;

use super::{gaussian_log_prob, ACTION_DIM};
use crate::nn::{Checkpoint, Mlp};
use crate::{Error, Result, SimRng};

/// Diagonal Gaussian policy with a state-independent log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(obs_dim: usize, log_std_init: f64, rng: &mut SimRng) -> Result<Self> {
        Ok(Self {
            net: Mlp::standard(obs_dim, ACTION_DIM, rng)?,
            log_std: vec![log_std_init; ACTION_DIM],
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.extra.len() != ck.net.output_dim() {
            return Err(Error::format("checkpoint", "actor log-std length differs from output size"));
        }
        Ok(Self {
            net: ck.net.clone(),
            log_std: ck.extra.clone(),
        })
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(obs)
    }

    /// Samples an action and returns it with its log-probability.
    pub fn sample(&self, obs: &[f64], rng: &mut SimRng) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_log_prob(&mean, &self.log_std, &action);
        Ok((action, lp))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        Ok(gaussian_log_prob(&self.mean(obs)?, &self.log_std, action))
    }

    /// Network parameters followed by the log-std.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.net.params();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.net.param_count();
        if flat.len() != n + self.log_std.len() {
            return Err(Error::DimensionMismatch {
                expected: n + self.log_std.len(),
                actual: flat.len(),
            });
        }
        self.net.set_params(&flat[..n])?;
        self.log_std.copy_from_slice(&flat[n..]);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count() + self.log_std.len()
    }
}

/// Anything that turns per-UAV observations into per-UAV commands.
pub trait Controller {
    fn commands(&self, observations: &[Vec<f64>], rng: &mut SimRng) -> Result<Vec<Vec<f64>>>;
}

/// Deterministic evaluation: the actor's mean action.
pub struct MeanAction<'a>(pub &'a GaussianPolicy);

impl Controller for MeanAction<'_> {
    fn commands(&self, observations: &[Vec<f64>], _rng: &mut SimRng) -> Result<Vec<Vec<f64>>> {
        observations.iter().map(|o| self.0.mean(o)).collect()
    }
}

/// Commands drawn uniformly from the command box `[-1, 1]^5`.
pub struct UniformRandom;

impl Controller for UniformRandom {
    fn commands(&self, observations: &[Vec<f64>], rng: &mut SimRng) -> Result<Vec<Vec<f64>>> {
        Ok(observations
            .iter()
            .map(|_| (0..ACTION_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect())
    }
}
