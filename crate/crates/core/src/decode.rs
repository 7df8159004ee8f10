//! Inference: greedy and stochastic decoding of a trained synthesis policy,
//! with multi-run post-selection.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::nn::{masked_softmax, ForwardCache, PolicyParams, Real};
use crate::operators::Operator;
use crate::synth::{sample_target, EnvState, GateSet, RewardConfig};
use crate::train::{derive_rng, sample_index};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Greedy,
    Sample,
    TopK,
    TopP,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub runs: usize,
    /// Step limit; `None` uses the default for the register size.
    pub max_steps: Option<usize>,
    pub k: usize,
    pub p: f64,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { strategy: Strategy::Greedy, runs: 1, max_steps: None, k: 3, p: 0.9, seed: 0 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("decode.runs", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("decode.k", "must be at least 1"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config("decode.p", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn steps_for(&self, n_qubits: usize) -> usize {
        self.max_steps.unwrap_or_else(|| crate::synth::default_max_steps(n_qubits))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    /// Best circuit found, `None` if every run failed.
    pub circuit: Option<Circuit>,
    pub runs_attempted: usize,
    pub runs_succeeded: usize,
    pub wall_time: Duration,
}

impl SynthesisResult {
    pub fn success(&self) -> bool {
        self.circuit.is_some()
    }

    /// `(depth2q, count2q)` of the returned circuit.
    pub fn metrics(&self) -> Option<(usize, usize)> {
        self.circuit.as_ref().map(|c| (c.depth2q(), c.count2q()))
    }
}

fn check_binding<T: Real>(params: &PolicyParams<T>, gate_set: &GateSet, obs_shape: [usize; 3]) -> Result<()> {
    let arch = params.arch();
    if arch.n_actions != gate_set.len() || arch.input != obs_shape {
        return Err(Error::ShapeMismatch {
            expected: format!("input {:?} with {} actions", obs_shape, gate_set.len()),
            got: format!("input {:?} with {} actions", arch.input, arch.n_actions),
        });
    }
    Ok(())
}

/// Lowest index among the maxima.
pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Deterministic decoding: always take the most likely action. Fails on
/// reaching the step limit or revisiting an operator state.
pub fn decode_greedy<O: Operator, T: Real>(
    params: &PolicyParams<T>,
    target: &O,
    gate_set: &GateSet,
    max_steps: usize,
) -> Result<SynthesisResult> {
    let start = Instant::now();
    let n = gate_set.n_qubits();
    check_binding(params, gate_set, O::obs_shape(n))?;
    let reward = RewardConfig::default();
    let mut state = EnvState::new(target.clone());
    let mut seen = HashSet::new();
    seen.insert(state.operator.key());
    let mut obs = vec![0.0f32; O::obs_shape(n).iter().product()];
    let mut obs_t = vec![T::zero(); obs.len()];
    let mut cache = ForwardCache::default();
    let mut solved = state.solved();
    while !solved && state.steps_taken < max_steps {
        state.operator.encode_into(&mut obs);
        for (d, &x) in obs_t.iter_mut().zip(&obs) {
            *d = T::from_f64(x as f64);
        }
        params.forward(&obs_t, 1, &mut cache)?;
        let gate = gate_set.gate(argmax(&cache.logits))?;
        state.step(gate, &reward, max_steps)?;
        solved = state.solved();
        if !solved && !seen.insert(state.operator.key()) {
            break;
        }
    }
    let circuit = if solved { Some(state.recover_exact()?) } else { None };
    Ok(SynthesisResult {
        runs_succeeded: circuit.is_some() as usize,
        circuit,
        runs_attempted: 1,
        wall_time: start.elapsed(),
    })
}

fn choose<T: Real>(probs: &mut [T], cfg: &DecodeConfig, rng: &mut ChaCha8Rng) -> usize {
    match cfg.strategy {
        Strategy::Greedy => argmax(probs),
        Strategy::Sample => sample_index(probs, rng),
        Strategy::TopK | Strategy::TopP => {
            let mut order: Vec<usize> = (0..probs.len()).collect();
            order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            let keep = if cfg.strategy == Strategy::TopK {
                cfg.k.min(order.len())
            } else {
                let mut acc = 0.0;
                let mut count = 0;
                for &i in &order {
                    acc += probs[i].as_f64();
                    count += 1;
                    if acc >= cfg.p {
                        break;
                    }
                }
                count
            };
            for &i in &order[keep..] {
                probs[i] = T::zero();
            }
            let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
            for p in probs.iter_mut() {
                *p = T::from_f64(p.as_f64() / total);
            }
            sample_index(probs, rng)
        }
    }
}

/// Independent stochastic runs decoded in lockstep; returns the successful
/// circuit with the smallest `(depth2q, count2q)`. Run `i` draws from the
/// stream `i` of `cfg.seed`, so a prefix of runs is shared between configs
/// that differ only in `runs`.
pub fn decode_multi<O: Operator, T: Real>(
    params: &PolicyParams<T>,
    target: &O,
    gate_set: &GateSet,
    cfg: &DecodeConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    let n = gate_set.n_qubits();
    let max_steps = cfg.steps_for(n);
    if cfg.strategy == Strategy::Greedy {
        return decode_greedy(params, target, gate_set, max_steps);
    }
    let start = Instant::now();
    check_binding(params, gate_set, O::obs_shape(n))?;
    let reward = RewardConfig::default();
    let obs_len: usize = O::obs_shape(n).iter().product();
    let mut states: Vec<EnvState<O>> = (0..cfg.runs).map(|_| EnvState::new(target.clone())).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.runs).map(|i| derive_rng(cfg.seed, i as u64)).collect();
    let mut best: Option<((usize, usize), Circuit)> = None;
    let mut succeeded = 0;
    let mut active: Vec<usize> = Vec::new();
    for (i, s) in states.iter().enumerate() {
        if s.solved() {
            succeeded += 1;
            let c = s.recover_exact()?;
            best = Some(((c.depth2q(), c.count2q()), c));
        } else {
            active.push(i);
        }
    }
    let mut obs = vec![0.0f32; obs_len];
    let mut obs_t: Vec<T> = Vec::new();
    let mut cache = ForwardCache::default();
    let mut probs = vec![T::zero(); gate_set.len()];
    while !active.is_empty() {
        obs_t.clear();
        for &i in &active {
            states[i].operator.encode_into(&mut obs);
            obs_t.extend(obs.iter().map(|&x| T::from_f64(x as f64)));
        }
        params.forward(&obs_t, active.len(), &mut cache)?;
        let mut still = Vec::with_capacity(active.len());
        for (row, &i) in active.iter().enumerate() {
            masked_softmax(cache.logits_row(row), None, &mut probs);
            let a = choose(&mut probs, cfg, &mut rngs[i]);
            let (_, done) = states[i].step(gate_set.gate(a)?, &reward, max_steps)?;
            if states[i].solved() {
                succeeded += 1;
                let c = states[i].recover_exact()?;
                let key = (c.depth2q(), c.count2q());
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, c));
                }
            } else if !done {
                still.push(i);
            }
        }
        active = still;
    }
    Ok(SynthesisResult {
        circuit: best.map(|(_, c)| c),
        runs_attempted: cfg.runs,
        runs_succeeded: succeeded,
        wall_time: start.elapsed(),
    })
}

/// Decode with the configured strategy.
pub fn synthesize<O: Operator, T: Real>(
    params: &PolicyParams<T>,
    target: &O,
    gate_set: &GateSet,
    cfg: &DecodeConfig,
) -> Result<SynthesisResult> {
    decode_multi(params, target, gate_set, cfg)
}

/// Fraction of `n_targets` random last-level targets that decode
/// successfully. An empty target set counts as fully solved.
pub fn success_rate<O: Operator, T: Real>(
    params: &PolicyParams<T>,
    gate_set: &GateSet,
    n_targets: usize,
    max_difficulty: usize,
    cfg: &DecodeConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    if n_targets == 0 {
        return Ok(1.0);
    }
    let mut solved = 0;
    for _ in 0..n_targets {
        let target: O = sample_target(gate_set, max_difficulty, max_difficulty, rng)?;
        if synthesize(params, &target, gate_set, cfg)?.success() {
            solved += 1;
        }
    }
    Ok(solved as f64 / n_targets as f64)
}
