//! Synthesis as a sequential decision process: action sets, rewards, episodes
//! and the difficulty curriculum.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, DepthTracker, Gate};
use crate::env::{EpisodeStats, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::operators::{random_target, Operator, OperatorKind};
use crate::topology::CouplingMap;

/// Resampling attempts before accepting a target that collapsed to the identity.
const IDENTITY_RESAMPLES: usize = 64;

/// Ordered action list; the index of a gate is its action id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSet {
    kind: OperatorKind,
    n_qubits: usize,
    actions: Vec<Gate>,
}

impl GateSet {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn actions(&self) -> &[Gate] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn gate(&self, action: usize) -> Result<Gate> {
        self.actions
            .get(action)
            .copied()
            .ok_or(Error::InvalidAction { action, n_actions: self.actions.len() })
    }
}

/// Clifford: every H, then every S, then CX both ways per edge. Linear: CX
/// both ways per edge. Permutation: one SWAP per edge.
pub fn build_gate_set(kind: OperatorKind, coupling: &CouplingMap) -> GateSet {
    let n = coupling.n_qubits();
    let mut actions = Vec::new();
    if kind == OperatorKind::Clifford {
        actions.extend((0..n).map(Gate::H));
        actions.extend((0..n).map(Gate::S));
    }
    for &(a, b) in coupling.undirected_edges() {
        match kind {
            OperatorKind::Permutation => actions.push(Gate::Swap(a, b)),
            OperatorKind::Linear | OperatorKind::Clifford => {
                actions.push(Gate::Cx(a, b));
                actions.push(Gate::Cx(b, a));
            }
        }
    }
    GateSet { kind, n_qubits: n, actions }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub success_reward: f64,
    pub penalty_2q: f64,
    pub penalty_1q: f64,
    pub penalty_depth: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { success_reward: 10.0, penalty_2q: -0.2, penalty_1q: -0.02, penalty_depth: -0.05 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.success_reward <= 0.0 {
            return Err(Error::config("env.reward.success_reward", "must be positive"));
        }
        for (key, v) in [
            ("penalty_2q", self.penalty_2q),
            ("penalty_1q", self.penalty_1q),
            ("penalty_depth", self.penalty_depth),
        ] {
            if v > 0.0 || !v.is_finite() {
                return Err(Error::config(format!("env.reward.{key}"), "must be finite and <= 0"));
            }
        }
        Ok(())
    }

    pub fn gate_penalty(&self, gate: &Gate) -> f64 {
        if gate.is_two_qubit() {
            self.penalty_2q
        } else {
            self.penalty_1q
        }
    }
}

/// Default step limit for a register of `n_qubits`.
pub fn default_max_steps(n_qubits: usize) -> usize {
    if n_qubits <= 9 {
        128
    } else {
        16 * n_qubits
    }
}

#[derive(Clone, Debug)]
pub struct EnvState<O: Operator> {
    pub initial: O,
    pub operator: O,
    pub steps_taken: usize,
    /// Gates applied so far, in time order.
    pub accumulated: Vec<Gate>,
    pub done: bool,
    depth: DepthTracker,
}

impl<O: Operator> EnvState<O> {
    pub fn new(target: O) -> Self {
        let n = target.n_qubits();
        EnvState {
            initial: target.clone(),
            operator: target,
            steps_taken: 0,
            accumulated: Vec::new(),
            done: false,
            depth: DepthTracker::new(n),
        }
    }

    pub fn depth2q(&self) -> usize {
        self.depth.depth()
    }

    /// Apply one gate and return `(reward, done)`.
    pub fn step(&mut self, gate: Gate, reward: &RewardConfig, max_steps: usize) -> Result<(f64, bool)> {
        if self.done {
            return Err(Error::StepAfterDone);
        }
        self.operator.apply_gate(&gate)?;
        let before = self.depth.depth();
        let after = self.depth.push(&gate);
        self.accumulated.push(gate);
        self.steps_taken += 1;
        let mut r = reward.gate_penalty(&gate);
        if after > before {
            r += reward.penalty_depth;
        }
        let solved = self.operator.is_identity();
        if solved {
            r += reward.success_reward;
        }
        self.done = solved || self.steps_taken >= max_steps;
        Ok((r, self.done))
    }

    pub fn solved(&self) -> bool {
        self.operator.is_identity()
    }

    /// The circuit implementing the initial operator: the accumulated gates
    /// reversed, each one inverted.
    pub fn recover_circuit(&self) -> Result<Circuit> {
        if !self.solved() {
            return Err(Error::NotSolved);
        }
        Circuit::from_gates(self.initial.n_qubits(), invert_sequence(&self.accumulated))
    }

    /// Like `recover_circuit`, followed by the correction of anything the
    /// identity test ignores, so the circuit reproduces the initial operator
    /// exactly (Clifford signs included).
    pub fn recover_exact(&self) -> Result<Circuit> {
        if !self.solved() {
            return Err(Error::NotSolved);
        }
        let mut gates = self.accumulated.clone();
        gates.extend(self.operator.residual_correction());
        Circuit::from_gates(self.initial.n_qubits(), invert_sequence(&gates))
    }
}

/// Reverse a gate sequence and invert each gate.
pub fn invert_sequence(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().flat_map(Gate::inverse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub window: usize,
    pub threshold: f64,
    pub max_difficulty: usize,
    pub initial_difficulty: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig { window: 128, threshold: 0.9, max_difficulty: 1024, initial_difficulty: 1 }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("curriculum.window", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::config("curriculum.threshold", "must lie in (0, 1]"));
        }
        if self.max_difficulty == 0 {
            return Err(Error::config("curriculum.max_difficulty", "must be at least 1"));
        }
        if self.initial_difficulty == 0 || self.initial_difficulty > self.max_difficulty {
            return Err(Error::config("curriculum.initial_difficulty", "must lie in 1..=max_difficulty"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumState {
    config: CurriculumConfig,
    difficulty: usize,
    outcomes: VecDeque<bool>,
    successes: usize,
}

impl CurriculumState {
    pub fn new(config: CurriculumConfig) -> Self {
        CurriculumState {
            config,
            difficulty: config.initial_difficulty.clamp(1, config.max_difficulty.max(1)),
            outcomes: VecDeque::with_capacity(config.window),
            successes: 0,
        }
    }

    pub fn difficulty(&self) -> usize {
        self.difficulty
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.config
    }

    pub fn at_max(&self) -> bool {
        self.difficulty == self.config.max_difficulty
    }

    /// Success rate over the current window (0 when empty).
    pub fn success_rate(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.successes as f64 / self.outcomes.len() as f64
        }
    }

    /// Record one episode; returns true when the difficulty was raised.
    pub fn update(&mut self, success: bool) -> bool {
        if self.outcomes.len() == self.config.window
            && self.outcomes.pop_front() == Some(true) {
                self.successes -= 1;
            }
        self.outcomes.push_back(success);
        self.successes += success as usize;
        let full = self.outcomes.len() == self.config.window;
        if full && self.success_rate() >= self.config.threshold && !self.at_max() {
            self.difficulty += 1;
            self.outcomes.clear();
            self.successes = 0;
            return true;
        }
        false
    }
}

/// Sample a target for the given difficulty, switching to the dedicated
/// sampler of the kind (if any) at the last curriculum level. Targets that
/// collapse to the identity are redrawn.
pub fn sample_target<O: Operator>(
    gate_set: &GateSet,
    difficulty: usize,
    max_difficulty: usize,
    rng: &mut impl Rng,
) -> Result<O> {
    let n = gate_set.n_qubits();
    let mut last = None;
    for _ in 0..IDENTITY_RESAMPLES {
        let op = if difficulty >= max_difficulty {
            match O::max_difficulty_target(n, rng) {
                Some(op) => op,
                None => random_target(n, difficulty, gate_set.actions(), rng)?,
            }
        } else {
            random_target(n, difficulty, gate_set.actions(), rng)?
        };
        if !op.is_identity() {
            return Ok(op);
        }
        last = Some(op);
    }
    Ok(last.expect("at least one draw"))
}

/// Synthesis environment for one operator kind on one coupling map.
#[derive(Clone, Debug)]
pub struct SynthEnv<O: Operator> {
    gate_set: GateSet,
    reward: RewardConfig,
    max_steps: usize,
    max_difficulty: usize,
    state: EnvState<O>,
    episode_reward: f64,
}

impl<O: Operator> SynthEnv<O> {
    pub fn new(gate_set: GateSet, reward: RewardConfig, max_steps: usize, max_difficulty: usize) -> Result<Self> {
        if gate_set.kind() != O::KIND {
            return Err(Error::Verification(format!(
                "gate set for {} used with a {} environment",
                gate_set.kind(),
                O::KIND
            )));
        }
        reward.validate()?;
        let state = EnvState::new(O::identity(gate_set.n_qubits()));
        Ok(SynthEnv { gate_set, reward, max_steps, max_difficulty, state, episode_reward: 0.0 })
    }

    pub fn gate_set(&self) -> &GateSet {
        &self.gate_set
    }

    pub fn state(&self) -> &EnvState<O> {
        &self.state
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// Start an episode from a given target.
    pub fn reset_to(&mut self, target: O) {
        self.state = EnvState::new(target);
        self.episode_reward = 0.0;
    }
}

impl<O: Operator> Environment for SynthEnv<O> {
    fn n_actions(&self) -> usize {
        self.gate_set.len()
    }

    fn obs_shape(&self) -> [usize; 3] {
        O::obs_shape(self.gate_set.n_qubits())
    }

    fn reset(&mut self, difficulty: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let target = sample_target(&self.gate_set, difficulty, self.max_difficulty, rng)?;
        self.reset_to(target);
        Ok(())
    }

    fn encode_into(&self, out: &mut [f32]) {
        self.state.operator.encode_into(out);
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let gate = self.gate_set.gate(action)?;
        let (reward, done) = self.state.step(gate, &self.reward, self.max_steps)?;
        self.episode_reward += reward;
        Ok(StepOutcome { reward, done, success: done && self.state.solved() })
    }

    fn episode_stats(&self) -> EpisodeStats {
        EpisodeStats {
            success: self.state.solved(),
            steps: self.state.steps_taken,
            count2q: crate::circuit::count2q(&self.state.accumulated),
            depth2q: self.state.depth2q(),
            reward: self.episode_reward,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::operators::{CliffordOp, LinearOp, PermutationOp};
    use crate::topology::topology;

    #[test]
    fn gate_set_sizes() {
        let c = build_gate_set(OperatorKind::Clifford, &topology("7-H").unwrap());
        assert_eq!(c.len(), 26);
        assert_eq!(c.actions()[0], Gate::H(0));
        assert_eq!(c.actions()[7], Gate::S(0));
        assert_eq!(build_gate_set(OperatorKind::Permutation, &topology("8-L").unwrap()).len(), 7);
        let lin = build_gate_set(OperatorKind::Linear, &topology("3-L").unwrap());
        assert_eq!(lin.actions(), &[Gate::Cx(0, 1), Gate::Cx(1, 0), Gate::Cx(1, 2), Gate::Cx(2, 1)]);
    }

    #[test]
    fn reward_values() {
        let r = RewardConfig::default();
        let mut s = EnvState::new(PermutationOp::from_gates(3, &[Gate::Swap(0, 1)]).unwrap());
        let (rew, done) = s.step(Gate::Swap(0, 1), &r, 128).unwrap();
        assert!((rew - 9.75).abs() < 1e-12);
        assert!(done);
        assert!(matches!(s.step(Gate::Swap(0, 1), &r, 128), Err(Error::StepAfterDone)));

        let mut c = EnvState::new(CliffordOp::from_gates(2, &[Gate::Cx(0, 1)]).unwrap());
        let (rew, done) = c.step(Gate::H(0), &r, 128).unwrap();
        assert!((rew + 0.02).abs() < 1e-12);
        assert!(!done);
    }

    #[test]
    fn step_limit_ends_episode() {
        let r = RewardConfig::default();
        let mut s = EnvState::new(LinearOp::from_gates(2, &[Gate::Cx(0, 1)]).unwrap());
        let (rew, done) = s.step(Gate::Cx(1, 0), &r, 1).unwrap();
        assert!(done && !s.solved());
        assert!(rew < 0.0);
        assert!(matches!(s.recover_circuit(), Err(Error::NotSolved)));
    }

    #[test]
    fn recover_inverts_s() {
        let target = CliffordOp::from_gates(1, &[Gate::S(0), Gate::S(0), Gate::S(0)]).unwrap();
        let mut s = EnvState::new(target.clone());
        s.step(Gate::S(0), &RewardConfig::default(), 128).unwrap();
        let c = s.recover_circuit().unwrap();
        assert_eq!(c.gates(), &[Gate::S(0), Gate::S(0), Gate::S(0)]);
        assert_eq!(CliffordOp::from_gates(1, c.gates()).unwrap(), target);
    }

    #[test]
    fn curriculum_rules() {
        let cfg = CurriculumConfig { max_difficulty: 2, ..Default::default() };
        let mut cur = CurriculumState::new(cfg);
        for i in 0..128 {
            let raised = cur.update(true);
            assert_eq!(raised, i == 127);
        }
        assert_eq!(cur.difficulty(), 2);
        for _ in 0..500 {
            cur.update(true);
        }
        assert_eq!(cur.difficulty(), 2);

        let mut half = CurriculumState::new(CurriculumConfig::default());
        for i in 0..1000 {
            half.update(i % 2 == 0);
        }
        assert_eq!(half.difficulty(), 1);
    }

    #[test]
    fn reset_is_deterministic_and_nontrivial() {
        let gs = build_gate_set(OperatorKind::Permutation, &topology("4-L").unwrap());
        let mut a = SynthEnv::<PermutationOp>::new(gs.clone(), RewardConfig::default(), 128, 1024).unwrap();
        let mut b = a.clone();
        for seed in 0..20 {
            a.reset(1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            b.reset(1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a.state().operator, b.state().operator);
            assert!(!a.state().operator.is_identity());
        }
    }

    #[test]
    fn reward_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        let bad = RewardConfig { penalty_2q: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
