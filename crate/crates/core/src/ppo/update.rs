use rand::seq::SliceRandom;

use super::policy::GaussianPolicy;
use super::rollout::RolloutBuffer;
use super::{clip_is_inactive, clip_objective, entropy, gaussian_log_prob, PpoConfig};
use crate::nn::{Adam, Mlp};
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct ActorSample {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticSample {
    pub observation: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    /// Mean probability ratio over the whole batch before any step.
    pub initial_mean_ratio: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub actor_samples: usize,
    pub critic_samples: usize,
}

/// Flattens finalized buffers into per-UAV actor samples and per-step critic
/// samples. With `normalize`, team advantages are shifted to zero mean and
/// scaled to unit standard deviation over all steps.
pub fn flatten_buffers(buffers: &[RolloutBuffer], normalize: bool) -> Result<(Vec<ActorSample>, Vec<CriticSample>)> {
    let mut advantages = Vec::new();
    let mut critic = Vec::new();
    for b in buffers {
        advantages.extend_from_slice(b.advantages()?);
        for (t, &target) in b.transitions.iter().zip(b.returns()?) {
            critic.push(CriticSample {
                observation: t.critic_observation.clone(),
                target,
            });
        }
    }
    if critic.is_empty() {
        return Err(Error::EmptyInput("ppo_update needs at least one transition"));
    }
    if normalize {
        let n = advantages.len() as f64;
        let mean = advantages.iter().sum::<f64>() / n;
        let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let scale = 1.0 / var.sqrt().max(1e-8);
        for a in &mut advantages {
            *a = (*a - mean) * scale;
        }
    }
    let mut actor = Vec::new();
    let mut k = 0;
    for b in buffers {
        for t in &b.transitions {
            for ((o, a), &lp) in t.observations.iter().zip(&t.actions).zip(&t.log_probs) {
                actor.push(ActorSample {
                    observation: o.clone(),
                    action: a.clone(),
                    old_log_prob: lp,
                    advantage: advantages[k],
                });
            }
            k += 1;
        }
    }
    Ok((actor, critic))
}

/// Clip and ratio bookkeeping of one actor loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorLossInfo {
    pub loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

/// Actor loss `-(mean clipped surrogate) - c_H * H` and its gradient with
/// respect to [`GaussianPolicy::params`].
pub fn actor_loss_and_grad(
    actor: &GaussianPolicy,
    samples: &[ActorSample],
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<(ActorLossInfo, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("actor batch"));
    }
    let n_net = actor.net.param_count();
    let dim = actor.log_std.len();
    let mut grad = vec![0.0; n_net + dim];
    let inv_b = 1.0 / samples.len() as f64;
    let (mut surrogate, mut ratio_sum, mut clipped) = (0.0, 0.0, 0usize);
    let inv_var: Vec<f64> = actor.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
    let mut upstream = vec![0.0; dim];
    for s in samples {
        let trace = actor.net.forward_trace(&s.observation)?;
        let mean = trace.output();
        let lp = gaussian_log_prob(mean, &actor.log_std, &s.action);
        let ratio = (lp - s.old_log_prob).exp();
        ratio_sum += ratio;
        surrogate += clip_objective(ratio, s.advantage, clip_eps);
        if !clip_is_inactive(ratio, s.advantage, clip_eps) {
            clipped += 1;
            continue;
        }
        // d(-rA/B)/dlogp
        let coef = -ratio * s.advantage * inv_b;
        if coef == 0.0 {
            continue;
        }
        for k in 0..dim {
            let diff = s.action[k] - mean[k];
            upstream[k] = coef * diff * inv_var[k];
            grad[n_net + k] += coef * (diff * diff * inv_var[k] - 1.0);
        }
        actor.net.backward(&trace, &upstream, &mut grad[..n_net])?;
    }
    let h = entropy(&actor.log_std);
    for g in &mut grad[n_net..] {
        *g -= entropy_coef;
    }
    let info = ActorLossInfo {
        loss: -surrogate * inv_b - entropy_coef * h,
        mean_ratio: ratio_sum * inv_b,
        clip_fraction: clipped as f64 * inv_b,
        entropy: h,
    };
    Ok((info, grad))
}

/// Mean squared critic error and its gradient.
pub fn critic_loss_and_grad(critic: &Mlp, samples: &[CriticSample]) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("critic batch"));
    }
    let mut grad = vec![0.0; critic.param_count()];
    let inv_b = 1.0 / samples.len() as f64;
    let mut loss = 0.0;
    for s in samples {
        let trace = critic.forward_trace(&s.observation)?;
        let err = trace.output()[0] - s.target;
        loss += err * err;
        critic.backward(&trace, &[2.0 * err * inv_b], &mut grad)?;
    }
    Ok((loss * inv_b, grad))
}

/// Optimizer state carried across updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub actor: Adam,
    pub critic: Adam,
}

impl Optimizers {
    pub fn new(actor: &GaussianPolicy, critic: &Mlp, learning_rate: f64) -> Self {
        Self {
            actor: Adam::new(actor.param_count(), learning_rate),
            critic: Adam::new(critic.param_count(), learning_rate),
        }
    }
}

/// `cfg.epochs` passes of shuffled minibatch steps on the actor and critic.
pub fn ppo_update(
    buffers: &[RolloutBuffer],
    actor: &mut GaussianPolicy,
    critic: &mut Mlp,
    opt: &mut Optimizers,
    cfg: &PpoConfig,
    rng: &mut SimRng,
) -> Result<UpdateStats> {
    let (actor_samples, critic_samples) = flatten_buffers(buffers, cfg.normalize_advantages)?;
    let (initial, _) = actor_loss_and_grad(actor, &actor_samples, cfg.clip_eps, cfg.entropy_coef)?;

    let mut stats = UpdateStats {
        initial_mean_ratio: initial.mean_ratio,
        actor_samples: actor_samples.len(),
        critic_samples: critic_samples.len(),
        ..UpdateStats::default()
    };
    let mut actor_order: Vec<usize> = (0..actor_samples.len()).collect();
    let mut critic_order: Vec<usize> = (0..critic_samples.len()).collect();
    let (mut actor_batches, mut critic_batches) = (0usize, 0usize);
    let mut weighted = (0.0, 0.0, 0.0);
    let mut params = actor.params();
    let mut critic_params = critic.params();
    let mut batch_a = Vec::with_capacity(cfg.minibatch);
    let mut batch_c = Vec::with_capacity(cfg.minibatch);
    for _ in 0..cfg.epochs {
        actor_order.shuffle(rng);
        critic_order.shuffle(rng);
        for chunk in actor_order.chunks(cfg.minibatch) {
            batch_a.clear();
            batch_a.extend(chunk.iter().map(|&i| actor_samples[i].clone()));
            let (info, grad) = actor_loss_and_grad(actor, &batch_a, cfg.clip_eps, cfg.entropy_coef)?;
            opt.actor.step(&mut params, &grad)?;
            let n_net = actor.net.param_count();
            for ls in &mut params[n_net..] {
                *ls = ls.clamp(cfg.log_std_min, cfg.log_std_max);
            }
            actor.set_params(&params)?;
            stats.actor_loss += info.loss;
            weighted.0 += info.mean_ratio;
            weighted.1 += info.clip_fraction;
            weighted.2 += info.entropy;
            actor_batches += 1;
        }
        for chunk in critic_order.chunks(cfg.minibatch) {
            batch_c.clear();
            batch_c.extend(chunk.iter().map(|&i| critic_samples[i].clone()));
            let (loss, grad) = critic_loss_and_grad(critic, &batch_c)?;
            opt.critic.step(&mut critic_params, &grad)?;
            critic.set_params(&critic_params)?;
            stats.critic_loss += loss;
            critic_batches += 1;
        }
    }
    let na = actor_batches as f64;
    stats.actor_loss /= na;
    stats.mean_ratio = weighted.0 / na;
    stats.clip_fraction = weighted.1 / na;
    stats.entropy = weighted.2 / na;
    stats.critic_loss /= critic_batches as f64;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::env::{CodecConfig, EnvConfig, Scenario};
    use crate::ppo::rollout::collect_rollouts;
    use crate::rng_from_seed;

    fn scenario() -> Scenario {
        Scenario {
            env: EnvConfig {
                slots: 10,
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

    fn setup(seed: u64) -> (Scenario, GaussianPolicy, Mlp, Vec<RolloutBuffer>) {
        let sc = scenario();
        let mut rng = rng_from_seed(seed);
        let actor = GaussianPolicy::new(sc.observation_dim(), -0.7, &mut rng).unwrap();
        let critic = Mlp::standard(sc.critic_observation_dim(), 1, &mut rng).unwrap();
        let mut bufs = collect_rollouts(&sc, &actor, &critic, &[1, 2], 1).unwrap();
        for b in &mut bufs {
            b.finalize(0.99, 0.95, 0.01, 0.0).unwrap();
        }
        (sc, actor, critic, bufs)
    }

    #[test]
    fn initial_ratio_is_one() {
        let (_, mut actor, mut critic, bufs) = setup(3);
        let cfg = PpoConfig::default();
        let mut opt = Optimizers::new(&actor, &critic, cfg.learning_rate);
        let stats = ppo_update(&bufs, &mut actor, &mut critic, &mut opt, &cfg, &mut rng_from_seed(0)).unwrap();
        assert!((stats.initial_mean_ratio - 1.0).abs() < 1e-6);
        assert!((0.0..=1.0).contains(&stats.clip_fraction));
        assert_eq!(stats.actor_samples, 2 * 10 * 4);
    }

    #[test]
    fn zero_advantages_leave_only_entropy_gradient() {
        let (_, actor, _, bufs) = setup(4);
        let (mut samples, _) = flatten_buffers(&bufs, false).unwrap();
        for s in &mut samples {
            s.advantage = 0.0;
        }
        let (_, grad) = actor_loss_and_grad(&actor, &samples, 0.2, 0.01).unwrap();
        let n = actor.net.param_count();
        assert!(grad[..n].iter().all(|&g| g == 0.0));
        assert!(grad[n..].iter().all(|&g| (g + 0.01).abs() < 1e-15));
    }

    #[test]
    fn surrogate_gradient_at_old_policy_is_policy_gradient() {
        let (_, actor, _, bufs) = setup(5);
        let (samples, _) = flatten_buffers(&bufs, true).unwrap();
        let (_, grad) = actor_loss_and_grad(&actor, &samples, 0.2, 0.0).unwrap();
        let n_net = actor.net.param_count();
        let mut pg = vec![0.0; grad.len()];
        let b = samples.len() as f64;
        for s in &samples {
            let trace = actor.net.forward_trace(&s.observation).unwrap();
            let mean = trace.output();
            let mut up = vec![0.0; mean.len()];
            for k in 0..mean.len() {
                let iv = (-2.0 * actor.log_std[k]).exp();
                let d = s.action[k] - mean[k];
                up[k] = -s.advantage / b * d * iv;
                pg[n_net + k] += -s.advantage / b * (d * d * iv - 1.0);
            }
            actor.net.backward(&trace, &up, &mut pg[..n_net]).unwrap();
        }
        for (g, p) in grad.iter().zip(&pg) {
            assert!((g - p).abs() < 1e-6);
        }
    }

    #[test]
    fn normalization_preserves_advantage_sign() {
        let (_, _, _, bufs) = setup(6);
        let (raw, _) = flatten_buffers(&bufs, false).unwrap();
        let (norm, _) = flatten_buffers(&bufs, true).unwrap();
        let mean = raw.iter().map(|s| s.advantage).sum::<f64>() / raw.len() as f64;
        for (r, n) in raw.iter().zip(&norm) {
            assert_eq!((r.advantage - mean) > 0.0, n.advantage > 0.0);
        }
    }

    #[test]
    fn clip_fraction_grows_with_learning_rate() {
        let run = |lr: f64| {
            let (_, mut actor, mut critic, bufs) = setup(7);
            let cfg = PpoConfig {
                learning_rate: lr,
                ..PpoConfig::default()
            };
            let mut opt = Optimizers::new(&actor, &critic, lr);
            ppo_update(&bufs, &mut actor, &mut critic, &mut opt, &cfg, &mut rng_from_seed(1))
                .unwrap()
                .clip_fraction
        };
        let low = run(5e-4);
        let high = run(5e-2);
        assert!(high > low, "clip fraction {low} -> {high}");
    }

    #[test]
    fn empty_buffers_are_rejected() {
        let (_, mut actor, mut critic, _) = setup(8);
        let cfg = PpoConfig::default();
        let mut opt = Optimizers::new(&actor, &critic, cfg.learning_rate);
        assert!(ppo_update(&[], &mut actor, &mut critic, &mut opt, &cfg, &mut rng_from_seed(0)).is_err());
    }
}
