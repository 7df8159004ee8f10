//! The operator being synthesized, in its three representations.

mod clifford;
mod linear;
mod permutation;
mod random;

use std::fmt;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::Result;

pub use clifford::CliffordOp;
pub use linear::LinearOp;
pub use permutation::PermutationOp;
pub use random::{random_target, random_uniform_clifford, uniform_walk_length};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Permutation,
    Linear,
    Clifford,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Permutation => "permutation",
            OperatorKind::Linear => "linear",
            OperatorKind::Clifford => "clifford",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Network input: a `(rows, cols, channels)` tensor stored channel-last.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub shape: [usize; 3],
    pub data: Vec<f32>,
}

impl Observation {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Observation { shape, data: vec![0.0; shape.iter().product()] }
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize, ch: usize) -> usize {
        (r * self.shape[1] + c) * self.shape[2] + ch
    }

    pub fn at(&self, r: usize, c: usize, ch: usize) -> f32 {
        self.data[self.index(r, c, ch)]
    }
}

/// Operator evolved by gates during synthesis. Gates are appended in time
/// order: applying `g` to an operator `U` yields `g * U`.
pub trait Operator: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    /// State identity used for search and loop detection. For Cliffords the
    /// phase vector is excluded.
    type Key: Clone + Eq + Hash + Send + Sync + fmt::Debug;

    const KIND: OperatorKind;

    fn identity(n_qubits: usize) -> Self;

    fn n_qubits(&self) -> usize;

    fn apply_gate(&mut self, gate: &Gate) -> Result<()>;

    fn is_identity(&self) -> bool;

    fn key(&self) -> Self::Key;

    fn obs_shape(n_qubits: usize) -> [usize; 3];

    /// Write the observation into `out`, which has `obs_shape` length.
    fn encode_into(&self, out: &mut [f32]);

    fn encode(&self) -> Observation {
        let mut obs = Observation::zeros(Self::obs_shape(self.n_qubits()));
        self.encode_into(&mut obs.data);
        obs
    }

    /// Target drawn once the curriculum reaches its last level, if the kind
    /// has a dedicated sampler.
    fn max_difficulty_target<R: Rng + ?Sized>(_n_qubits: usize, _rng: &mut R) -> Option<Self> {
        None
    }

    /// Single-qubit gates that remove whatever the identity test ignores
    /// (the Clifford phase vector). Only meaningful once `is_identity` holds.
    fn residual_correction(&self) -> Vec<Gate> {
        Vec::new()
    }

    /// Replay a gate list onto the identity.
    fn from_gates(n_qubits: usize, gates: &[Gate]) -> Result<Self> {
        let mut op = Self::identity(n_qubits);
        for g in gates {
            op.apply_gate(g)?;
        }
        Ok(op)
    }
}

pub(crate) fn check_qubits(gate: &Gate, n: usize) -> Result<()> {
    gate.validate(n)
}
