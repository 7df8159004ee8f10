//! Outer training loop: vectorized rollouts, GAE, PPO updates and the
//! difficulty curriculum.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeStats, Environment};
use crate::error::{Error, Result};
use crate::nn::{masked_softmax, ForwardCache, PolicyArch, PolicyParams, Real};
use crate::ppo::{gae, ppo_update, Adam, PpoConfig, RolloutBatch};
use crate::synth::{CurriculumConfig, CurriculumState};

pub const LOG_HEADER: &str = "steps,difficulty,success_rate,mean_2q_count,mean_2q_depth,mean_reward";

/// RNG stream for a named purpose under a root seed.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids under the training seed.
const STREAM_INIT: u64 = 0;
const STREAM_UPDATE: u64 = 1;
const STREAM_ENV_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub curriculum: CurriculumConfig,
    pub seed: u64,
    pub precision: Precision,
    /// Step environments one after another instead of on the worker pool.
    pub deterministic: bool,
    /// Stop this many log rows after success first reaches 1.0 at the last level.
    pub stop_after_converged: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ppo: PpoConfig::default(),
            curriculum: CurriculumConfig::default(),
            seed: 0,
            precision: Precision::F32,
            deterministic: false,
            stop_after_converged: None,
        }
    }
}

/// One row of the training log, written after each update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub steps: u64,
    pub difficulty: usize,
    /// Fraction of episodes finished during the rollout that succeeded.
    pub success_rate: f64,
    /// Means over the successful episodes of the rollout.
    pub mean_2q_count: f64,
    pub mean_2q_depth: f64,
    /// Mean total reward of finished episodes.
    pub mean_reward: f64,
}

impl LogRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            self.steps, self.difficulty, self.success_rate, self.mean_2q_count, self.mean_2q_depth, self.mean_reward
        )
    }

    pub fn parse_csv(line: &str) -> Result<LogRow> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || Error::parse(0, format!("malformed log row `{line}`"));
        if f.len() != 6 {
            return Err(bad());
        }
        Ok(LogRow {
            steps: f[0].parse().map_err(|_| bad())?,
            difficulty: f[1].parse().map_err(|_| bad())?,
            success_rate: f[2].parse().map_err(|_| bad())?,
            mean_2q_count: f[3].parse().map_err(|_| bad())?,
            mean_2q_depth: f[4].parse().map_err(|_| bad())?,
            mean_reward: f[5].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParams<f32>,
    pub log: Vec<LogRow>,
    pub steps: u64,
    pub final_difficulty: usize,
    /// Whether success reached 1.0 at the last curriculum level.
    pub converged: bool,
    /// Set when training stopped on a non-finite loss; `params` are the last
    /// finite ones.
    pub aborted: Option<String>,
}

/// The three phases of a convergent run: success rises at the first level,
/// difficulty never decreases, and once success hits 1.0 at the last level
/// it stays at or above `sustain`.
pub fn check_training_phases(log: &[LogRow], max_difficulty: usize, sustain: f64) -> std::result::Result<(), String> {
    if log.windows(2).any(|w| w[1].difficulty < w[0].difficulty) {
        return Err("difficulty decreased".into());
    }
    let first_level: Vec<f64> = log.iter().filter(|r| r.difficulty == log[0].difficulty).map(|r| r.success_rate).collect();
    let rose = log.iter().any(|r| r.difficulty > log[0].difficulty)
        || first_level.last().zip(first_level.first()).is_some_and(|(l, f)| l > f);
    if !rose {
        return Err("success rate never rose at the first level".into());
    }
    let Some(hit) = log.iter().position(|r| r.difficulty == max_difficulty && r.success_rate >= 1.0) else {
        return Err("never reached success 1.0 at the last level".into());
    };
    if let Some(r) = log[hit..].iter().find(|r| r.success_rate < sustain) {
        return Err(format!("success fell to {} at step {}", r.success_rate, r.steps));
    }
    Ok(())
}

struct EnvSlot<E> {
    env: E,
    rng: ChaCha8Rng,
}

/// Train a fresh policy on `envs` (one per parallel environment).
pub fn train<E: Environment>(
    envs: Vec<E>,
    arch: PolicyArch,
    cfg: &TrainConfig,
    log_sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    let mut rng = derive_rng(cfg.seed, STREAM_INIT);
    match cfg.precision {
        Precision::F32 => {
            let params = PolicyParams::<f32>::init(arch, &mut rng)?;
            train_from(envs, params, cfg, log_sink)
        }
        Precision::F64 => {
            let params = PolicyParams::<f64>::init(arch, &mut rng)?;
            train_from(envs, params, cfg, log_sink)
        }
    }
}

/// Train starting from existing parameters.
pub fn train_from<E: Environment, T: Real>(
    envs: Vec<E>,
    mut params: PolicyParams<T>,
    cfg: &TrainConfig,
    mut log_sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    let ppo = &cfg.ppo;
    ppo.validate()?;
    cfg.curriculum.validate()?;
    if envs.len() != ppo.n_envs {
        return Err(Error::config("ppo.n_envs", format!("expected {} environments, got {}", ppo.n_envs, envs.len())));
    }
    let arch = params.arch().clone();
    let obs_shape = envs[0].obs_shape();
    if obs_shape != arch.input || envs[0].n_actions() != arch.n_actions {
        return Err(Error::ShapeMismatch {
            expected: format!("input {:?} with {} actions", arch.input, arch.n_actions),
            got: format!("input {:?} with {} actions", obs_shape, envs[0].n_actions()),
        });
    }
    let n_envs = ppo.n_envs;
    let obs_len: usize = obs_shape.iter().product();
    let n_actions = arch.n_actions;
    let horizon = ppo.rollout_len;

    let mut curriculum = CurriculumState::new(cfg.curriculum);
    let mut slots: Vec<EnvSlot<E>> = envs
        .into_iter()
        .enumerate()
        .map(|(i, env)| EnvSlot { env, rng: derive_rng(cfg.seed, STREAM_ENV_BASE + i as u64) })
        .collect();
    for s in &mut slots {
        s.env.reset(curriculum.difficulty(), &mut s.rng)?;
    }
    let mut update_rng = derive_rng(cfg.seed, STREAM_UPDATE);
    let mut adam = Adam::<T>::new(params.as_slice().len(), ppo.learning_rate);
    let mut cache = ForwardCache::<T>::default();

    if let Some(w) = log_sink.as_deref_mut() {
        writeln!(w, "{LOG_HEADER}")?;
    }

    let mut steps: u64 = 0;
    let mut log = Vec::new();
    let mut converged_at: Option<usize> = None;
    let mut aborted = None;
    let mut obs_t: Vec<T> = vec![T::zero(); n_envs * obs_len];
    let mut obs_f: Vec<f32> = vec![0.0; n_envs * obs_len];
    let mut mask_buf = vec![true; n_envs * n_actions];
    let mut probs = vec![T::zero(); n_actions];

    while steps < ppo.total_steps {
        let n = horizon * n_envs;
        let mut batch = RolloutBatch {
            obs_len,
            n_actions,
            obs: Vec::with_capacity(n * obs_len),
            actions: Vec::with_capacity(n),
            masks: None,
            log_probs: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        let mut masks_all: Vec<bool> = Vec::with_capacity(n * n_actions);
        let mut any_masked = false;
        let mut rewards = vec![0.0; n];
        let mut dones = vec![false; n];
        let mut finished: Vec<EpisodeStats> = Vec::new();

        for t in 0..horizon {
            for (i, s) in slots.iter().enumerate() {
                s.env.encode_into(&mut obs_f[i * obs_len..(i + 1) * obs_len]);
                let m = &mut mask_buf[i * n_actions..(i + 1) * n_actions];
                s.env.action_mask(m);
                any_masked |= m.iter().any(|&x| !x);
            }
            for (d, &x) in obs_t.iter_mut().zip(&obs_f) {
                *d = T::from_f64(x as f64);
            }
            params.forward(&obs_t, n_envs, &mut cache)?;
            let mut actions = vec![0usize; n_envs];
            for (i, s) in slots.iter_mut().enumerate() {
                let m = &mask_buf[i * n_actions..(i + 1) * n_actions];
                masked_softmax(cache.logits_row(i), Some(m), &mut probs);
                let a = sample_index(&probs, &mut s.rng);
                actions[i] = a;
                batch.log_probs.push(probs[a].as_f64().ln());
                batch.values.push(cache.values[i].as_f64());
                batch.actions.push(a);
            }
            batch.obs.extend_from_slice(&obs_f);
            masks_all.extend_from_slice(&mask_buf);

            let outcomes: Vec<Result<crate::env::StepOutcome>> = if cfg.deterministic {
                slots.iter_mut().zip(&actions).map(|(s, &a)| s.env.step(a)).collect()
            } else {
                slots.par_iter_mut().zip(actions.par_iter()).map(|(s, &a)| s.env.step(a)).collect()
            };
            for (i, out) in outcomes.into_iter().enumerate() {
                let out = out?;
                rewards[t * n_envs + i] = out.reward;
                dones[t * n_envs + i] = out.done;
                if out.done {
                    let stats = slots[i].env.episode_stats();
                    curriculum.update(stats.success);
                    finished.push(stats);
                }
            }
            let d = curriculum.difficulty();
            for (i, s) in slots.iter_mut().enumerate() {
                if dones[t * n_envs + i] {
                    s.env.reset(d, &mut s.rng)?;
                }
            }
            steps += n_envs as u64;
        }

        // bootstrap values for the states after the last step
        for (i, s) in slots.iter().enumerate() {
            s.env.encode_into(&mut obs_f[i * obs_len..(i + 1) * obs_len]);
        }
        for (d, &x) in obs_t.iter_mut().zip(&obs_f) {
            *d = T::from_f64(x as f64);
        }
        params.forward(&obs_t, n_envs, &mut cache)?;

        batch.advantages = vec![0.0; n];
        batch.returns = vec![0.0; n];
        for i in 0..n_envs {
            let idx: Vec<usize> = (0..horizon).map(|t| t * n_envs + i).collect();
            let r: Vec<f64> = idx.iter().map(|&k| rewards[k]).collect();
            let v: Vec<f64> = idx.iter().map(|&k| batch.values[k]).collect();
            let d: Vec<bool> = idx.iter().map(|&k| dones[k]).collect();
            let (adv, ret) = gae(&r, &v, &d, cache.values[i].as_f64(), ppo.gamma, ppo.lambda);
            for (j, &k) in idx.iter().enumerate() {
                batch.advantages[k] = adv[j];
                batch.returns[k] = ret[j];
            }
        }
        if any_masked {
            batch.masks = Some(masks_all);
        }
        batch.normalize_advantages();
        match ppo_update(&mut params, &mut adam, &batch, ppo, &mut update_rng) {
            Ok(_) => {}
            Err(Error::NonFiniteLoss) => {
                aborted = Some(Error::NonFiniteLoss.to_string());
                break;
            }
            Err(e) => return Err(e),
        }

        let row = summarize(steps, curriculum.difficulty(), &finished, log.last());
        if let Some(w) = log_sink.as_deref_mut() {
            writeln!(w, "{}", row.csv())?;
        }
        log.push(row);
        if converged_at.is_none() && row.difficulty == cfg.curriculum.max_difficulty && row.success_rate >= 1.0 {
            converged_at = Some(log.len() - 1);
        }
        if let (Some(at), Some(extra)) = (converged_at, cfg.stop_after_converged) {
            if log.len() > at + extra {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params: params.cast(),
        log,
        steps,
        final_difficulty: curriculum.difficulty(),
        converged: converged_at.is_some(),
        aborted,
    })
}

fn summarize(steps: u64, difficulty: usize, finished: &[EpisodeStats], prev: Option<&LogRow>) -> LogRow {
    if finished.is_empty() {
        // no episode ended during this rollout: carry the previous rates
        return LogRow {
            steps,
            difficulty,
            success_rate: prev.map_or(0.0, |p| p.success_rate),
            mean_2q_count: prev.map_or(0.0, |p| p.mean_2q_count),
            mean_2q_depth: prev.map_or(0.0, |p| p.mean_2q_depth),
            mean_reward: prev.map_or(0.0, |p| p.mean_reward),
        };
    }
    let solved: Vec<&EpisodeStats> = finished.iter().filter(|s| s.success).collect();
    let mean = |f: &dyn Fn(&EpisodeStats) -> f64, xs: &[&EpisodeStats]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().map(|s| f(s)).sum::<f64>() / xs.len() as f64
        }
    };
    let all: Vec<&EpisodeStats> = finished.iter().collect();
    LogRow {
        steps,
        difficulty,
        success_rate: solved.len() as f64 / finished.len() as f64,
        mean_2q_count: mean(&|s| s.count2q as f64, &solved),
        mean_2q_depth: mean(&|s| s.depth2q as f64, &solved),
        mean_reward: mean(&|s| s.reward, &all),
    }
}

/// Draw an index from a probability vector.
pub fn sample_index<T: Real>(probs: &[T], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
