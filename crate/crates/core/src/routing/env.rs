use std::sync::Arc;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::decode::argmax;
use crate::env::{EpisodeStats, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::{masked_softmax, ForwardCache, PolicyArch, PolicyParams};
use crate::topology::{CouplingMap, Layout};
use crate::train::{derive_rng, sample_index};

use super::{lower_swaps, qv_circuit, random_two_qubit_circuit, reverse_circuit, RoutedResult, RoutingConfig, RoutingState};

const MAX_REDRAWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingVariant {
    /// `(N, N, H)` layer tensor, one action per coupling edge.
    Fixed,
    /// `(S_a, H, 1)` distance-change features, one action per active SWAP slot.
    Generic,
}

/// Observation and action binding shared by training and inference.
#[derive(Clone, Debug)]
struct Binding {
    variant: RoutingVariant,
    cfg: RoutingConfig,
    edges: Vec<(usize, usize)>,
    n: usize,
}

impl Binding {
    fn new(variant: RoutingVariant, coupling: &CouplingMap, cfg: RoutingConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Binding { variant, edges: coupling.undirected_edges().to_vec(), n: coupling.n_qubits(), cfg })
    }

    fn n_actions(&self) -> usize {
        match self.variant {
            RoutingVariant::Fixed => self.edges.len(),
            RoutingVariant::Generic => self.cfg.max_active_swaps,
        }
    }

    fn obs_shape(&self) -> [usize; 3] {
        match self.variant {
            RoutingVariant::Fixed => [self.n, self.n, self.cfg.horizon],
            RoutingVariant::Generic => [self.cfg.max_active_swaps, self.cfg.horizon, 1],
        }
    }

    fn encode(&self, state: &RoutingState, out: &mut [f32]) {
        match self.variant {
            RoutingVariant::Fixed => {
                state.encode_fixed_into(self.n, self.cfg.horizon, out).expect("register fits the binding");
            }
            RoutingVariant::Generic => {
                state.encode_generic_into(self.cfg.max_active_swaps, self.cfg.horizon, out);
            }
        }
    }

    /// Fixed: edges touching a front op, or relabeling two untouched qubits.
    /// Generic: occupied slots.
    fn mask(&self, state: &RoutingState, mask: &mut [bool]) {
        match self.variant {
            RoutingVariant::Fixed => {
                let mut involved = vec![false; self.n];
                for op in state.front() {
                    let (p, q) = state.physical_pair(op);
                    involved[p] = true;
                    involved[q] = true;
                }
                for (m, &(a, b)) in mask.iter_mut().zip(&self.edges) {
                    *m = involved[a] || involved[b] || state.is_layout_swap(a, b);
                }
            }
            RoutingVariant::Generic => {
                let (swaps, _) = state.active_swaps(self.cfg.max_active_swaps);
                for (i, m) in mask.iter_mut().enumerate() {
                    *m = i < swaps.len();
                }
            }
        }
    }

    fn swap_for(&self, state: &RoutingState, action: usize) -> Result<(usize, usize)> {
        let n_actions = self.n_actions();
        let invalid = || Error::InvalidAction { action, n_actions };
        match self.variant {
            RoutingVariant::Fixed => self.edges.get(action).copied().ok_or_else(invalid),
            RoutingVariant::Generic => {
                let (swaps, _) = state.active_swaps(self.cfg.max_active_swaps);
                swaps.get(action).copied().ok_or_else(invalid)
            }
        }
    }

    fn note_overflow(&self, state: &mut RoutingState) {
        if self.variant == RoutingVariant::Generic {
            let (_, overflow) = state.active_swaps(self.cfg.max_active_swaps);
            state.counters.active_overflow = state.counters.active_overflow.max(overflow);
        }
    }

    /// Apply an action, or the release SWAP when the state has stalled.
    fn step(&self, state: &mut RoutingState, action: usize) -> Result<f64> {
        let swap = if state.is_stalled() {
            state.counters.fallback_steps += 1;
            state.release_swap().ok_or_else(|| Error::Routing("stalled with an empty front".into()))?
        } else {
            self.note_overflow(state);
            self.swap_for(state, action)?
        };
        let step = state.route_step(swap.0, swap.1, &self.cfg)?;
        let mut reward = -step.cost;
        if step.done {
            reward += self.cfg.success_reward;
        }
        Ok(reward)
    }
}

/// Training environment: random CX circuits whose length is the curriculum
/// difficulty, and layered block circuits at the maximum difficulty. An
/// episode succeeds when it finishes without the stall fallback.
pub struct RoutingEnv {
    coupling: Arc<CouplingMap>,
    binding: Binding,
    max_difficulty: usize,
    state: Option<RoutingState>,
    steps: usize,
    reward: f64,
}

impl RoutingEnv {
    pub fn new(
        coupling: Arc<CouplingMap>,
        variant: RoutingVariant,
        cfg: RoutingConfig,
        max_difficulty: usize,
    ) -> Result<Self> {
        if coupling.diameter() < 2 {
            return Err(Error::Routing(format!("coupling map `{}` needs no routing", coupling.name())));
        }
        let binding = Binding::new(variant, &coupling, cfg)?;
        Ok(RoutingEnv { coupling, binding, max_difficulty, state: None, steps: 0, reward: 0.0 })
    }

    pub fn state(&self) -> Option<&RoutingState> {
        self.state.as_ref()
    }

    pub fn policy_arch(&self, conv_filters: usize, kernel: usize, hidden: Vec<usize>) -> PolicyArch {
        PolicyArch { input: self.obs_shape(), conv_filters, kernel, hidden, n_actions: self.n_actions() }
    }

    fn draw(&self, difficulty: usize, rng: &mut ChaCha8Rng) -> Circuit {
        let n = self.coupling.n_qubits();
        if difficulty >= self.max_difficulty {
            qv_circuit(n, self.binding.cfg.target_layers, rng)
        } else {
            random_two_qubit_circuit(n, difficulty, rng)
        }
    }

    /// Start an episode on a given circuit from the trivial layout.
    pub fn reset_to(&mut self, circuit: &Circuit) -> Result<()> {
        let n = self.coupling.n_qubits();
        let state = RoutingState::new(circuit, Arc::clone(&self.coupling), Layout::trivial(n), true)?;
        if state.is_done() {
            return Err(Error::Routing("circuit needs no routing".into()));
        }
        self.state = Some(state);
        self.steps = 0;
        self.reward = 0.0;
        Ok(())
    }

    fn live(&self) -> &RoutingState {
        self.state.as_ref().expect("reset before use")
    }
}

impl Environment for RoutingEnv {
    fn n_actions(&self) -> usize {
        self.binding.n_actions()
    }

    fn obs_shape(&self) -> [usize; 3] {
        self.binding.obs_shape()
    }

    fn reset(&mut self, difficulty: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        for _ in 0..MAX_REDRAWS {
            let c = self.draw(difficulty, rng);
            match self.reset_to(&c) {
                Ok(()) => return Ok(()),
                Err(Error::Routing(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Routing(format!("no target needing routing after {MAX_REDRAWS} draws")))
    }

    fn encode_into(&self, out: &mut [f32]) {
        self.binding.encode(self.live(), out);
    }

    fn action_mask(&self, mask: &mut [bool]) {
        self.binding.mask(self.live(), mask);
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let state = self.state.as_mut().ok_or(Error::StepAfterDone)?;
        let reward = self.binding.step(state, action)?;
        self.steps += 1;
        self.reward += reward;
        let done = state.is_done();
        Ok(StepOutcome { reward, done, success: done && state.counters.fallback_steps == 0 })
    }

    fn episode_stats(&self) -> EpisodeStats {
        let state = self.live();
        let (count2q, depth2q) = if state.is_done() {
            let lowered = lower_swaps(&state.circuit());
            (lowered.count2q(), lowered.depth2q())
        } else {
            (0, 0)
        };
        let success = state.is_done() && state.counters.fallback_steps == 0;
        EpisodeStats { success, steps: self.steps, count2q, depth2q, reward: self.reward }
    }
}

/// A trained routing policy bound to one coupling map.
#[derive(Clone, Debug)]
pub struct RoutingPolicy {
    coupling: Arc<CouplingMap>,
    binding: Binding,
    params: PolicyParams<f32>,
}

impl RoutingPolicy {
    pub fn new(
        coupling: Arc<CouplingMap>,
        variant: RoutingVariant,
        cfg: RoutingConfig,
        params: PolicyParams<f32>,
    ) -> Result<Self> {
        let binding = Binding::new(variant, &coupling, cfg)?;
        let arch = params.arch();
        if arch.input != binding.obs_shape() || arch.n_actions != binding.n_actions() {
            return Err(Error::ShapeMismatch {
                expected: format!("input {:?}, {} actions", binding.obs_shape(), binding.n_actions()),
                got: format!("input {:?}, {} actions", arch.input, arch.n_actions),
            });
        }
        Ok(RoutingPolicy { coupling, binding, params })
    }

    pub fn coupling(&self) -> &Arc<CouplingMap> {
        &self.coupling
    }

    pub fn params(&self) -> &PolicyParams<f32> {
        &self.params
    }

    pub fn variant(&self) -> RoutingVariant {
        self.binding.variant
    }

    pub fn config(&self) -> &RoutingConfig {
        &self.binding.cfg
    }
}

/// Action selection during inference.
pub enum RouteMode<'a> {
    Greedy,
    Sample(&'a mut ChaCha8Rng),
}

/// Route one circuit with the policy, starting from `initial`.
pub fn route_with_policy(
    policy: &RoutingPolicy,
    circuit: &Circuit,
    initial: Layout,
    mut mode: RouteMode<'_>,
) -> Result<RoutedResult> {
    let binding = &policy.binding;
    let mut state = RoutingState::new(circuit, Arc::clone(&policy.coupling), initial, true)?;
    let mut obs = vec![0.0f32; binding.obs_shape().iter().product()];
    let mut mask = vec![false; binding.n_actions()];
    let mut probs = vec![0.0f32; binding.n_actions()];
    let mut cache = ForwardCache::default();
    while !state.is_done() {
        binding.encode(&state, &mut obs);
        binding.mask(&state, &mut mask);
        policy.params.forward(&obs, 1, &mut cache)?;
        masked_softmax(&cache.logits, Some(&mask), &mut probs);
        let action = match &mut mode {
            RouteMode::Greedy => argmax(&probs),
            RouteMode::Sample(rng) => sample_index(&probs, *rng),
        };
        binding.step(&mut state, action)?;
    }
    RoutedResult::from_state(&state)
}

/// Alternate forward passes on `circuit` with backward passes on its reverse,
/// each seeded with the previous pass's final layout. Returns the best of all
/// passes as routings of `circuit`.
pub fn bidirectional_route(
    circuit: &Circuit,
    initial: Layout,
    iterations: usize,
    mut route: impl FnMut(&Circuit, Layout) -> Result<RoutedResult>,
) -> Result<RoutedResult> {
    if iterations == 0 {
        return Err(Error::config("routing.iterations", "must be at least 1"));
    }
    let reversed = reverse_circuit(circuit);
    let mut best: Option<RoutedResult> = None;
    let mut seed = initial;
    for pass in 0..iterations {
        let candidate = if pass % 2 == 0 {
            let r = route(circuit, seed)?;
            seed = r.final_layout.clone();
            r
        } else {
            let r = route(&reversed, seed)?;
            seed = r.final_layout.clone();
            r.reversed(circuit.len())
        };
        if best.as_ref().is_none_or(|b| candidate.key() < b.key()) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one pass"))
}

/// Repeated bidirectional routing: run 0 is greedy, later runs sample with
/// stream `i` of `seed`. Stops after `max_runs` or once `budget` has elapsed.
pub fn route_budgeted(
    policy: &RoutingPolicy,
    circuit: &Circuit,
    initial: Layout,
    iterations: usize,
    budget: Option<Duration>,
    max_runs: usize,
    seed: u64,
) -> Result<(RoutedResult, usize)> {
    let start = Instant::now();
    let mut best: Option<RoutedResult> = None;
    let mut runs = 0;
    while runs < max_runs.max(1) {
        if runs > 0 && budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
        let r = if runs == 0 {
            bidirectional_route(circuit, initial.clone(), iterations, |c, l| {
                route_with_policy(policy, c, l, RouteMode::Greedy)
            })?
        } else {
            let mut rng = derive_rng(seed, runs as u64);
            bidirectional_route(circuit, initial.clone(), iterations, |c, l| {
                route_with_policy(policy, c, l, RouteMode::Sample(&mut rng))
            })?
        };
        if best.as_ref().is_none_or(|b| r.key() < b.key()) {
            best = Some(r);
        }
        runs += 1;
    }
    Ok((best.expect("at least one run"), runs))
}
