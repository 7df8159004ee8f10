use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::operators::{CliffordOp, LinearOp, Operator, PermutationOp};
use crate::synth::{invert_sequence, GateSet};

/// What a search minimizes. Ties on the primary cost are broken by gate count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKey {
    /// Total gates.
    Gates,
    /// Two-qubit gates; single-qubit gates are free.
    TwoQubit,
    /// Layers of disjoint two-qubit gates; single-qubit gates are free.
    Layers,
}

/// Operators whose (phase-free) state packs into a `u64`.
pub trait Searchable: Operator {
    /// Largest register the exhaustive search accepts.
    const MAX_SEARCH_QUBITS: usize;

    fn pack(&self) -> u64;

    fn unpack(n_qubits: usize, key: u64) -> Self;
}

impl Searchable for PermutationOp {
    const MAX_SEARCH_QUBITS: usize = 6;

    fn pack(&self) -> u64 {
        self.mapping().iter().enumerate().fold(0, |acc, (i, &m)| acc | (m as u64) << (4 * i))
    }

    fn unpack(n: usize, key: u64) -> Self {
        let mapping = (0..n).map(|i| (key >> (4 * i) & 0xf) as usize).collect();
        PermutationOp::from_mapping(mapping).expect("packed permutation")
    }
}

fn pack_matrix(m: &BitMatrix) -> u64 {
    let mut key = 0u64;
    let mut bit = 0;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            key |= (m.get(r, c) as u64) << bit;
            bit += 1;
        }
    }
    key
}

fn unpack_matrix(rows: usize, cols: usize, key: u64) -> BitMatrix {
    let mut m = BitMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, key >> (r * cols + c) & 1 == 1);
        }
    }
    m
}

impl Searchable for LinearOp {
    const MAX_SEARCH_QUBITS: usize = 4;

    fn pack(&self) -> u64 {
        pack_matrix(self.matrix())
    }

    fn unpack(n: usize, key: u64) -> Self {
        LinearOp::from_matrix(unpack_matrix(n, n, key)).expect("packed linear function")
    }
}

impl Searchable for CliffordOp {
    const MAX_SEARCH_QUBITS: usize = 3;

    fn pack(&self) -> u64 {
        pack_matrix(self.matrix())
    }

    fn unpack(n: usize, key: u64) -> Self {
        CliffordOp::from_parts(unpack_matrix(2 * n, 2 * n, key), vec![false; 2 * n]).expect("packed tableau")
    }
}

type Cost = (u32, u32);

#[derive(Clone, Debug)]
struct Move {
    gates: Vec<Gate>,
    cost: Cost,
}

fn moves(gate_set: &GateSet, key: CostKey) -> Vec<Move> {
    let single = |g: &Gate, primary: u32| Move { gates: vec![*g], cost: (primary, 1) };
    match key {
        CostKey::Gates => gate_set.actions().iter().map(|g| single(g, 1)).collect(),
        CostKey::TwoQubit => gate_set.actions().iter().map(|g| single(g, g.is_two_qubit() as u32)).collect(),
        CostKey::Layers => {
            let (two, one): (Vec<Gate>, Vec<Gate>) = gate_set.actions().iter().partition(|g| g.is_two_qubit());
            let mut out: Vec<Move> = one.iter().map(|g| single(g, 0)).collect();
            let mut stack = Vec::new();
            matchings(&two, 0, 0, &mut stack, &mut out);
            out
        }
    }
}

/// Every non-empty set of pairwise disjoint gates from `gates[start..]`.
fn matchings(gates: &[Gate], start: usize, used: u64, stack: &mut Vec<Gate>, out: &mut Vec<Move>) {
    for i in start..gates.len() {
        let mask = gates[i].qubits().into_iter().fold(0u64, |m, q| m | 1 << q);
        if used & mask != 0 {
            continue;
        }
        stack.push(gates[i]);
        out.push(Move { gates: stack.clone(), cost: (1, stack.len() as u32) });
        matchings(gates, i + 1, used | mask, stack, out);
        stack.pop();
    }
}

fn add(a: Cost, b: Cost) -> Cost {
    (a.0 + b.0, a.1 + b.1)
}

/// Exact distances from the identity to every reachable operator state.
///
/// Every move is its own inverse on the phase-free state, so the distance
/// from the identity to `O` equals the distance from `O` to the identity.
#[derive(Clone, Debug)]
pub struct BfsTable<O: Searchable> {
    n_qubits: usize,
    cost_key: CostKey,
    moves: Vec<Move>,
    dist: HashMap<u64, Cost>,
    _kind: std::marker::PhantomData<O>,
}

impl<O: Searchable> BfsTable<O> {
    pub fn build(gate_set: &GateSet, cost_key: CostKey) -> Result<Self> {
        let n = gate_set.n_qubits();
        if n > O::MAX_SEARCH_QUBITS || gate_set.kind() != O::KIND {
            return Err(Error::BoundExceeded(format!(
                "exhaustive {} search supports at most {} qubits, got {n}",
                O::KIND,
                O::MAX_SEARCH_QUBITS
            )));
        }
        let moves = moves(gate_set, cost_key);
        let start = O::identity(n).pack();
        let mut dist = HashMap::new();
        dist.insert(start, (0, 0));
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(((0u32, 0u32), start)));
        while let Some(Reverse((d, key))) = heap.pop() {
            if dist.get(&key).is_some_and(|&best| best < d) {
                continue;
            }
            let op = O::unpack(n, key);
            for mv in &moves {
                let mut next = op.clone();
                for g in &mv.gates {
                    next.apply_gate(g)?;
                }
                let nd = add(d, mv.cost);
                let nk = next.pack();
                match dist.entry(nk) {
                    Entry::Occupied(mut e) => {
                        if nd < *e.get() {
                            e.insert(nd);
                            heap.push(Reverse((nd, nk)));
                        }
                    }
                    Entry::Vacant(e) => {
                        e.insert(nd);
                        heap.push(Reverse((nd, nk)));
                    }
                }
            }
        }
        Ok(BfsTable { n_qubits: n, cost_key, moves, dist, _kind: std::marker::PhantomData })
    }

    pub fn cost_key(&self) -> CostKey {
        self.cost_key
    }

    /// Number of reachable states.
    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Optimal primary cost of synthesizing `op`.
    pub fn distance(&self, op: &O) -> Option<u32> {
        self.dist.get(&op.pack()).map(|d| d.0)
    }

    /// An optimal circuit for `op` (phase excluded for Cliffords).
    pub fn solve(&self, op: &O) -> Result<Circuit> {
        let mut cur = op.clone();
        let mut d = *self
            .dist
            .get(&cur.pack())
            .ok_or_else(|| Error::Verification("operator unreachable with this gate set".into()))?;
        let mut applied = Vec::new();
        while d != (0, 0) {
            let mut advanced = false;
            for mv in &self.moves {
                let mut next = cur.clone();
                for g in &mv.gates {
                    next.apply_gate(g)?;
                }
                if let Some(&nd) = self.dist.get(&next.pack()) {
                    if add(nd, mv.cost) == d {
                        applied.extend_from_slice(&mv.gates);
                        cur = next;
                        d = nd;
                        advanced = true;
                        break;
                    }
                }
            }
            if !advanced {
                return Err(Error::Verification("distance table is inconsistent".into()));
            }
        }
        Circuit::from_gates(self.n_qubits, invert_sequence(&applied))
    }
}

/// Provably minimal circuit for a single operator.
pub fn bfs_optimal<O: Searchable>(op: &O, gate_set: &GateSet, cost_key: CostKey) -> Result<Circuit> {
    BfsTable::<O>::build(gate_set, cost_key)?.solve(op)
}

/// Pairs `i < j` with `mapping[i] > mapping[j]`.
pub fn inversion_count(perm: &PermutationOp) -> usize {
    let m = perm.mapping();
    (0..m.len()).map(|i| (i + 1..m.len()).filter(|&j| m[i] > m[j]).count()).sum()
}
