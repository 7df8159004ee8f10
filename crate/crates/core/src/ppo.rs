//! Generalized advantage estimation and the clipped-surrogate PPO update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{masked_softmax, ForwardCache, PolicyParams, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub rollout_len: usize,
    pub n_envs: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub total_steps: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch: 256,
            rollout_len: 128,
            n_envs: 16,
            ent_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            total_steps: 2_000_000,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("ppo.gamma", self.gamma > 0.0 && self.gamma <= 1.0, "must lie in (0, 1]"),
            ("ppo.lambda", (0.0..=1.0).contains(&self.lambda), "must lie in [0, 1]"),
            ("ppo.clip", self.clip > 0.0, "must be positive"),
            ("ppo.learning_rate", self.learning_rate > 0.0, "must be positive"),
            ("ppo.epochs", self.epochs > 0, "must be at least 1"),
            ("ppo.minibatch", self.minibatch > 0, "must be at least 1"),
            ("ppo.rollout_len", self.rollout_len > 0, "must be at least 1"),
            ("ppo.n_envs", self.n_envs > 0, "must be at least 1"),
            ("ppo.max_grad_norm", self.max_grad_norm > 0.0, "must be positive"),
        ];
        for (path, ok, msg) in checks {
            if !ok {
                return Err(Error::config(path, msg));
            }
        }
        Ok(())
    }
}

/// Advantages and return targets for one environment's trajectory segment.
/// `dones[t]` marks that the episode ended at step `t`, so the value of the
/// following state is not bootstrapped; `bootstrap` is the value of the
/// state after the last step.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "gae inputs must have equal length");
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Flattened rollout ready for optimization.
#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    pub obs_len: usize,
    pub n_actions: usize,
    pub obs: Vec<f32>,
    pub actions: Vec<usize>,
    /// Legal-action flags, `n_actions` per sample, if the environment masks.
    pub masks: Option<Vec<bool>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Shift and scale advantages to zero mean and unit deviation.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n == 0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt() + 1e-8;
        for a in &mut self.advantages {
            *a = (*a - mean) / std;
        }
    }
}

/// Loss terms of one minibatch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// One sample as seen by the loss.
#[derive(Clone, Copy, Debug)]
pub struct LossSample<'a> {
    pub action: usize,
    pub mask: Option<&'a [bool]>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// PPO loss (to minimize) and its gradients with respect to logits and
/// values, averaged over the samples.
pub fn ppo_loss<T: Real>(
    logits: &[T],
    values: &[T],
    samples: &[LossSample<'_>],
    cfg: &PpoConfig,
    d_logits: &mut [T],
    d_values: &mut [T],
) -> LossParts {
    let m = samples.len();
    let a = logits.len() / m.max(1);
    let inv = 1.0 / m as f64;
    let mut parts = LossParts::default();
    let mut probs = vec![T::zero(); a];
    for (i, s) in samples.iter().enumerate() {
        let z = &logits[i * a..(i + 1) * a];
        masked_softmax(z, s.mask, &mut probs);
        let p: Vec<f64> = probs.iter().map(|x| x.as_f64()).collect();
        let logp: Vec<f64> = p.iter().map(|&x| if x > 0.0 { x.ln() } else { 0.0 }).collect();
        let entropy: f64 = -p.iter().zip(&logp).map(|(x, l)| x * l).sum::<f64>();
        let lp = logp[s.action];
        let ratio = (lp - s.old_log_prob).exp();
        let surr1 = ratio * s.advantage;
        let surr2 = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage;
        parts.policy -= surr1.min(surr2) * inv;
        parts.entropy += entropy * inv;
        parts.mean_ratio += ratio * inv;
        parts.approx_kl += (s.old_log_prob - lp) * inv;
        if (ratio - 1.0).abs() > cfg.clip {
            parts.clip_fraction += inv;
        }
        // d(-min(surr1, surr2))/d logp; zero when the clipped branch is active
        let g_lp = if surr1 <= surr2 { -s.advantage * ratio } else { 0.0 };
        let dz = &mut d_logits[i * a..(i + 1) * a];
        for j in 0..a {
            let onehot = if j == s.action { 1.0 } else { 0.0 };
            let d_policy = g_lp * (onehot - p[j]);
            // dH/dz_j = -p_j (log p_j + H)
            let d_entropy = -p[j] * (logp[j] + entropy);
            dz[j] = T::from_f64((d_policy - cfg.ent_coef * d_entropy) * inv);
        }
        let v = values[i].as_f64();
        parts.value += (v - s.ret).powi(2) * inv;
        d_values[i] = T::from_f64(cfg.vf_coef * 2.0 * (v - s.ret) * inv);
    }
    parts.total = parts.policy + cfg.vf_coef * parts.value - cfg.ent_coef * parts.entropy;
    parts
}

/// Adam optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T: Real> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![T::zero(); n_params], v: vec![T::zero(); n_params] }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.step += 1;
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let lr = T::from_f64(self.lr * c2.sqrt() / c1);
        let eps = T::from_f64(self.eps * c2.sqrt());
        let one = T::one();
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            params[i] = params[i] - lr * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

/// Averages over all minibatches of an update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// Several epochs of minibatch Adam steps on the clipped surrogate. On a
/// non-finite loss the parameters and optimizer are restored and an error
/// is returned.
pub fn ppo_update<T: Real>(
    params: &mut PolicyParams<T>,
    adam: &mut Adam<T>,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateMetrics> {
    let saved = (params.clone(), adam.clone());
    let result = run_update(params, adam, batch, cfg, rng);
    if result.is_err() {
        *params = saved.0;
        *adam = saved.1;
    }
    result
}

fn run_update<T: Real>(
    params: &mut PolicyParams<T>,
    adam: &mut Adam<T>,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateMetrics> {
    let n = batch.len();
    let a = batch.n_actions;
    let mut order: Vec<usize> = (0..n).collect();
    let mut metrics = UpdateMetrics::default();
    let mut cache = ForwardCache::default();
    let mut grad = vec![T::zero(); params.as_slice().len()];
    let mut obs: Vec<T> = Vec::new();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let m = chunk.len();
            obs.clear();
            for &i in chunk {
                obs.extend(batch.obs[i * batch.obs_len..(i + 1) * batch.obs_len].iter().map(|&x| T::from_f64(x as f64)));
            }
            params.forward(&obs, m, &mut cache)?;
            let samples: Vec<LossSample> = chunk
                .iter()
                .map(|&i| LossSample {
                    action: batch.actions[i],
                    mask: batch.masks.as_ref().map(|mk| &mk[i * a..(i + 1) * a]),
                    old_log_prob: batch.log_probs[i],
                    advantage: batch.advantages[i],
                    ret: batch.returns[i],
                })
                .collect();
            let mut d_logits = vec![T::zero(); m * a];
            let mut d_values = vec![T::zero(); m];
            let parts = ppo_loss(&cache.logits, &cache.values, &samples, cfg, &mut d_logits, &mut d_values);
            if !parts.total.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            grad.fill(T::zero());
            params.backward(&cache, &d_logits, &d_values, &mut grad);
            let norm = grad.iter().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            if norm > cfg.max_grad_norm {
                let s = T::from_f64(cfg.max_grad_norm / norm);
                for g in &mut grad {
                    *g = *g * s;
                }
            }
            adam.step(params.as_mut_slice(), &grad);
            metrics.policy_loss += parts.policy;
            metrics.value_loss += parts.value;
            metrics.entropy += parts.entropy;
            metrics.mean_ratio += parts.mean_ratio;
            metrics.clip_fraction += parts.clip_fraction;
            metrics.approx_kl += parts.approx_kl;
            metrics.minibatches += 1;
        }
    }
    let k = metrics.minibatches.max(1) as f64;
    metrics.policy_loss /= k;
    metrics.value_loss /= k;
    metrics.entropy /= k;
    metrics.mean_ratio /= k;
    metrics.clip_fraction /= k;
    metrics.approx_kl /= k;
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn gae_trivial_cases() {
        let (adv, ret) = gae(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, 0.99, 0.95);
        assert!(adv.iter().chain(&ret).all(|&x| x == 0.0));
        let (adv, ret) = gae(&[2.0], &[0.5], &[true], 7.0, 0.99, 0.95);
        assert_eq!(adv, vec![1.5]);
        assert_eq!(ret, vec![2.0]);
    }

    #[test]
    fn gae_lambda_zero_is_td_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..10).map(|i| i == 4).collect();
        let boot = 0.3;
        let (adv, _) = gae(&r, &v, &d, boot, 0.9, 0.0);
        for t in 0..10 {
            let next = if t == 9 { boot } else { v[t + 1] };
            let live = if d[t] { 0.0 } else { 1.0 };
            assert!((adv[t] - (r[t] + 0.9 * next * live - v[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization() {
        let mut b = RolloutBatch { advantages: vec![1.0, 2.0, 3.0, 6.0], ..Default::default() };
        b.normalize_advantages();
        let mean: f64 = b.advantages.iter().sum::<f64>() / 4.0;
        let var: f64 = b.advantages.iter().map(|a| a * a).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
        let mut flat = RolloutBatch { advantages: vec![2.0; 3], ..Default::default() };
        flat.normalize_advantages();
        assert!(flat.advantages.iter().all(|a| a.is_finite() && *a == 0.0));
    }
}
