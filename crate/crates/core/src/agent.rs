//! Glue between run configurations, training, checkpoints and inference.

use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bitmatrix::BitMatrix;
use crate::checkpoint::{Checkpoint, CheckpointMeta, FORMAT_VERSION};
use crate::circuit::Circuit;
use crate::config::{RunConfig, Task};
use crate::decode::{synthesize, DecodeConfig, SynthesisResult};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::PolicyParams;
use crate::operators::{random_uniform_clifford, CliffordOp, LinearOp, Operator, OperatorKind, PermutationOp};
use crate::oracles::{BfsTable, CostKey, Searchable};
use crate::routing::{RoutingEnv, RoutingPolicy};
use crate::synth::{build_gate_set, default_max_steps, invert_sequence, sample_target, GateSet, SynthEnv};
use crate::topology::{topology, CouplingMap};
use crate::train::{train, TrainOutcome};

/// Train the agent a configuration describes and package it as a checkpoint.
pub fn train_run(cfg: &RunConfig, log: Option<&mut dyn Write>) -> Result<(Checkpoint, TrainOutcome)> {
    cfg.validate()?;
    let coupling = Arc::new(topology(&cfg.env.topology)?);
    let outcome = match cfg.env.task {
        Task::Permutation => train_synth::<PermutationOp>(cfg, &coupling, log)?,
        Task::Linear => train_synth::<LinearOp>(cfg, &coupling, log)?,
        Task::Clifford => train_synth::<CliffordOp>(cfg, &coupling, log)?,
        Task::Routing => {
            let envs = (0..cfg.ppo.n_envs)
                .map(|_| {
                    RoutingEnv::new(
                        Arc::clone(&coupling),
                        cfg.routing.variant,
                        cfg.routing.env_config(),
                        cfg.curriculum.max_difficulty,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let arch = cfg.arch.build(envs[0].obs_shape(), envs[0].n_actions());
            train(envs, arch, &cfg.train_config(), log)?
        }
    };
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        arch: outcome.params.arch().clone(),
        steps: outcome.steps,
        final_difficulty: outcome.final_difficulty,
        converged: outcome.converged,
        partial: outcome.aborted.is_some(),
    };
    let ckpt = Checkpoint::new(meta, outcome.params.clone())?;
    Ok((ckpt, outcome))
}

fn train_synth<O: Operator>(
    cfg: &RunConfig,
    coupling: &CouplingMap,
    log: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    let gate_set = build_gate_set(O::KIND, coupling);
    let n = coupling.n_qubits();
    let max_steps = cfg.env.max_steps.unwrap_or_else(|| default_max_steps(n));
    let envs = (0..cfg.ppo.n_envs)
        .map(|_| SynthEnv::<O>::new(gate_set.clone(), cfg.env.reward, max_steps, cfg.curriculum.max_difficulty))
        .collect::<Result<Vec<_>>>()?;
    let arch = cfg.arch.build(O::obs_shape(n), gate_set.len());
    train(envs, arch, &cfg.train_config(), log)
}

/// A synthesis target of any operator kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Permutation(PermutationOp),
    Linear(LinearOp),
    Clifford(CliffordOp),
}

impl Target {
    pub fn kind(&self) -> OperatorKind {
        match self {
            Target::Permutation(_) => OperatorKind::Permutation,
            Target::Linear(_) => OperatorKind::Linear,
            Target::Clifford(_) => OperatorKind::Clifford,
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Target::Permutation(o) => o.n_qubits(),
            Target::Linear(o) => o.n_qubits(),
            Target::Clifford(o) => o.n_qubits(),
        }
    }

    /// Uniformly random target (approximately uniform for Cliffords).
    pub fn random<R: Rng + ?Sized>(kind: OperatorKind, n: usize, rng: &mut R) -> Target {
        match kind {
            OperatorKind::Permutation => {
                let mut m: Vec<usize> = (0..n).collect();
                m.shuffle(rng);
                Target::Permutation(PermutationOp::from_mapping(m).expect("a permutation"))
            }
            OperatorKind::Linear => loop {
                let rows: Vec<Vec<bool>> = (0..n).map(|_| (0..n).map(|_| rng.gen()).collect()).collect();
                let m = BitMatrix::from_rows(&rows);
                if m.is_invertible() {
                    break Target::Linear(LinearOp::from_matrix(m).expect("invertible"));
                }
            },
            OperatorKind::Clifford => Target::Clifford(random_uniform_clifford(n, rng)),
        }
    }

    /// Target reached by `difficulty` random gates of `gate_set`, redrawn
    /// if it collapses to the identity.
    pub fn walk<R: Rng>(gate_set: &GateSet, difficulty: usize, rng: &mut R) -> Result<Target> {
        Ok(match gate_set.kind() {
            OperatorKind::Permutation => Target::Permutation(sample_target(gate_set, difficulty, usize::MAX, rng)?),
            OperatorKind::Linear => Target::Linear(sample_target(gate_set, difficulty, usize::MAX, rng)?),
            OperatorKind::Clifford => Target::Clifford(sample_target(gate_set, difficulty, usize::MAX, rng)?),
        })
    }

    /// Identity target of a kind.
    pub fn identity(kind: OperatorKind, n: usize) -> Target {
        match kind {
            OperatorKind::Permutation => Target::Permutation(PermutationOp::identity(n)),
            OperatorKind::Linear => Target::Linear(LinearOp::identity(n)),
            OperatorKind::Clifford => Target::Clifford(CliffordOp::identity(n)),
        }
    }

    /// Parse a target file: a permutation as an index list, a linear
    /// function as rows of `0`/`1`, a Clifford as a circuit to replay.
    pub fn parse(kind: OperatorKind, text: &str) -> Result<Target> {
        let lines = || {
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty())
        };
        match kind {
            OperatorKind::Permutation => {
                let mut mapping = Vec::new();
                for (line, l) in lines() {
                    for tok in l.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                        let v = tok.parse().map_err(|_| Error::parse(line, format!("`{tok}` is not an index")))?;
                        mapping.push(v);
                    }
                }
                Ok(Target::Permutation(PermutationOp::from_mapping(mapping)?))
            }
            OperatorKind::Linear => {
                let mut rows = Vec::new();
                for (line, l) in lines() {
                    let row = l
                        .chars()
                        .filter(|c| !c.is_whitespace())
                        .map(|c| match c {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            _ => Err(Error::parse(line, format!("`{c}` is not a bit"))),
                        })
                        .collect::<Result<Vec<bool>>>()?;
                    rows.push(row);
                }
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::parse(1, "matrix must be square and non-empty"));
                }
                Ok(Target::Linear(LinearOp::from_matrix(BitMatrix::from_rows(&rows))?))
            }
            OperatorKind::Clifford => {
                let c = Circuit::parse(text)?;
                Ok(Target::Clifford(CliffordOp::from_gates(c.n_qubits(), c.gates())?))
            }
        }
    }

    /// Whether `circuit` replays exactly to this target.
    pub fn verify(&self, circuit: &Circuit) -> Result<bool> {
        let n = circuit.n_qubits();
        Ok(match self {
            Target::Permutation(t) => PermutationOp::from_gates(n, circuit.gates())? == *t,
            Target::Linear(t) => LinearOp::from_gates(n, circuit.gates())? == *t,
            Target::Clifford(t) => CliffordOp::from_gates(n, circuit.gates())? == *t,
        })
    }
}

/// A loaded agent ready for inference.
#[derive(Clone, Debug)]
pub enum Agent {
    Synthesis { gate_set: GateSet, params: PolicyParams<f32> },
    Routing(RoutingPolicy),
}

impl Agent {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Agent> {
        let cfg = &ckpt.meta.config;
        let coupling = topology(&cfg.env.topology)?;
        match cfg.env.task.operator_kind() {
            Some(kind) => {
                let gate_set = build_gate_set(kind, &coupling);
                let arch = ckpt.params.arch();
                let n = coupling.n_qubits();
                let shape = match kind {
                    OperatorKind::Permutation => PermutationOp::obs_shape(n),
                    OperatorKind::Linear => LinearOp::obs_shape(n),
                    OperatorKind::Clifford => CliffordOp::obs_shape(n),
                };
                if arch.input != shape || arch.n_actions != gate_set.len() {
                    return Err(Error::Checkpoint(format!(
                        "architecture does not fit {} on {}",
                        kind,
                        coupling.name()
                    )));
                }
                Ok(Agent::Synthesis { gate_set, params: ckpt.params.clone() })
            }
            None => Ok(Agent::Routing(RoutingPolicy::new(
                Arc::new(coupling),
                cfg.routing.variant,
                cfg.routing.env_config(),
                ckpt.params.clone(),
            )?)),
        }
    }

    /// Synthesize a circuit for `target` and check it replays exactly.
    pub fn synthesize(&self, target: &Target, cfg: &DecodeConfig) -> Result<SynthesisResult> {
        let Agent::Synthesis { gate_set, params } = self else {
            return Err(Error::Checkpoint("routing checkpoint cannot synthesize operators".into()));
        };
        if target.kind() != gate_set.kind() {
            return Err(Error::Checkpoint(format!(
                "checkpoint synthesizes {} operators, target is {}",
                gate_set.kind(),
                target.kind()
            )));
        }
        if target.n_qubits() != gate_set.n_qubits() {
            return Err(Error::Checkpoint(format!(
                "checkpoint covers {} qubits, target has {}",
                gate_set.n_qubits(),
                target.n_qubits()
            )));
        }
        let result = match target {
            Target::Permutation(t) => synthesize(params, t, gate_set, cfg)?,
            Target::Linear(t) => synthesize(params, t, gate_set, cfg)?,
            Target::Clifford(t) => synthesize(params, t, gate_set, cfg)?,
        };
        if let Some(c) = &result.circuit {
            if !target.verify(c)? {
                return Err(Error::Verification("synthesized circuit does not replay to the target".into()));
            }
        }
        Ok(result)
    }
}

/// Exact optimal synthesis tables, built once per gate set.
pub enum OracleTable {
    Permutation(BfsTable<PermutationOp>),
    Linear(BfsTable<LinearOp>),
    Clifford(BfsTable<CliffordOp>),
}

impl OracleTable {
    /// `Ok(None)` when the register is beyond the search bound.
    pub fn build(gate_set: &GateSet, cost: CostKey) -> Result<Option<OracleTable>> {
        fn fits<O: Searchable>(g: &GateSet) -> bool {
            g.n_qubits() <= O::MAX_SEARCH_QUBITS
        }
        Ok(match gate_set.kind() {
            OperatorKind::Permutation if fits::<PermutationOp>(gate_set) => {
                Some(OracleTable::Permutation(BfsTable::build(gate_set, cost)?))
            }
            OperatorKind::Linear if fits::<LinearOp>(gate_set) => Some(OracleTable::Linear(BfsTable::build(gate_set, cost)?)),
            OperatorKind::Clifford if fits::<CliffordOp>(gate_set) => {
                Some(OracleTable::Clifford(BfsTable::build(gate_set, cost)?))
            }
            _ => None,
        })
    }

    pub fn solve(&self, target: &Target) -> Result<Circuit> {
        match (self, target) {
            (OracleTable::Permutation(t), Target::Permutation(o)) => t.solve(o),
            (OracleTable::Linear(t), Target::Linear(o)) => t.solve(o),
            (OracleTable::Clifford(t), Target::Clifford(o)) => {
                let c = t.solve(o)?;
                let mut rest = o.clone();
                let mut undo = invert_sequence(c.gates());
                for g in &undo {
                    rest.apply_gate(g)?;
                }
                undo.extend(rest.residual_correction());
                Circuit::from_gates(c.n_qubits(), invert_sequence(&undo))
            }
            _ => Err(Error::Verification("oracle kind differs from target kind".into())),
        }
    }
}
