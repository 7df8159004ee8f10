use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, DepthTracker, Gate, Qubits};
use crate::error::{Error, Result};
use crate::operators::Observation;
use crate::topology::{CouplingMap, Layout};

use super::RoutingConfig;

/// Where an output gate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Index of the gate in the input circuit.
    Original(usize),
    Inserted,
}

/// A two-qubit input gate with the single-qubit gates that precede it.
#[derive(Clone, Debug, PartialEq)]
struct LogicalOp {
    gate: Gate,
    index: usize,
    pre: Vec<(Gate, usize)>,
}

impl LogicalOp {
    fn pair(&self) -> (usize, usize) {
        match self.gate.qubits() {
            Qubits::Two(a, b) => (a, b),
            Qubits::One(_) => unreachable!("logical ops are two-qubit"),
        }
    }
}

/// Outcome of one routing step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouteStep {
    /// Non-negative cost of the step (CX-equivalents and depth growth).
    pub cost: f64,
    pub passed_through: usize,
    pub done: bool,
}

/// Counters reported with a routing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingCounters {
    pub swaps_inserted: usize,
    pub swaps_cancelled: usize,
    pub layout_swaps: usize,
    pub fallback_steps: usize,
    /// Largest number of active SWAPs dropped for lack of slots.
    pub active_overflow: usize,
}

/// Incremental routing of one circuit onto a coupling map.
#[derive(Clone, Debug)]
pub struct RoutingState {
    coupling: Arc<CouplingMap>,
    n_logical: usize,
    ops: Vec<LogicalOp>,
    trailing: Vec<(Gate, usize)>,
    /// Next unemitted op index per logical qubit, as positions into `queues`.
    queues: Vec<Vec<usize>>,
    heads: Vec<usize>,
    emitted: Vec<bool>,
    remaining: usize,
    layout: Layout,
    initial_layout: Layout,
    layout_trick: bool,
    output: Vec<(Gate, Provenance)>,
    /// Output index of the last gate on each physical qubit.
    last_gate: Vec<Option<usize>>,
    touched: Vec<bool>,
    depth: DepthTracker,
    since_progress: usize,
    pub counters: RoutingCounters,
}

impl RoutingState {
    /// Start routing `circuit` (logical qubits) with the given initial layout.
    /// `layout_trick` lets SWAPs on untouched qubits rewrite the initial layout.
    pub fn new(circuit: &Circuit, coupling: Arc<CouplingMap>, initial: Layout, layout_trick: bool) -> Result<Self> {
        let n_phys = coupling.n_qubits();
        let n_logical = circuit.n_qubits();
        if n_logical > n_phys {
            return Err(Error::Routing(format!(
                "circuit has {n_logical} qubits but the coupling map only {n_phys}"
            )));
        }
        if initial.len() != n_phys {
            return Err(Error::Routing(format!("layout covers {} qubits, expected {n_phys}", initial.len())));
        }
        let mut ops = Vec::new();
        let mut pending: Vec<Vec<(Gate, usize)>> = vec![Vec::new(); n_logical];
        let mut queues = vec![Vec::new(); n_phys];
        for (index, g) in circuit.gates().iter().enumerate() {
            match g.qubits() {
                Qubits::One(q) => pending[q].push((*g, index)),
                Qubits::Two(a, b) => {
                    let mut pre = std::mem::take(&mut pending[a]);
                    pre.append(&mut pending[b]);
                    pre.sort_by_key(|&(_, i)| i);
                    queues[a].push(ops.len());
                    queues[b].push(ops.len());
                    ops.push(LogicalOp { gate: *g, index, pre });
                }
            }
        }
        let mut trailing: Vec<(Gate, usize)> = pending.into_iter().flatten().collect();
        trailing.sort_by_key(|&(_, i)| i);
        let remaining = ops.len();
        let mut state = RoutingState {
            emitted: vec![false; ops.len()],
            ops,
            trailing,
            queues,
            heads: vec![0; n_phys],
            remaining,
            layout: initial.clone(),
            initial_layout: initial,
            layout_trick,
            output: Vec::new(),
            last_gate: vec![None; n_phys],
            touched: vec![false; n_phys],
            depth: DepthTracker::new(n_phys),
            since_progress: 0,
            counters: RoutingCounters::default(),
            n_logical,
            coupling,
        };
        state.pass_through();
        state.finish_if_done();
        Ok(state)
    }

    pub fn coupling(&self) -> &CouplingMap {
        &self.coupling
    }

    pub fn coupling_arc(&self) -> &Arc<CouplingMap> {
        &self.coupling
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn initial_layout(&self) -> &Layout {
        &self.initial_layout
    }

    pub fn is_done(&self) -> bool {
        self.remaining == 0
    }

    pub fn remaining_ops(&self) -> usize {
        self.remaining
    }

    pub fn output(&self) -> &[(Gate, Provenance)] {
        &self.output
    }

    pub fn output_depth2q(&self) -> usize {
        self.depth.depth()
    }

    pub fn touched(&self, physical: usize) -> bool {
        self.touched[physical]
    }

    /// Stalled steps after which the engine takes over: `n * diameter`.
    pub fn stall_limit(&self) -> usize {
        self.coupling.n_qubits() * self.coupling.diameter().max(1) as usize
    }

    pub fn is_stalled(&self) -> bool {
        self.since_progress >= self.stall_limit()
    }

    /// Consecutive SWAP steps without any op passing through.
    pub fn steps_since_progress(&self) -> usize {
        self.since_progress
    }

    fn is_ready(&self, op: usize) -> bool {
        let (a, b) = self.ops[op].pair();
        self.queues[a].get(self.heads[a]) == Some(&op) && self.queues[b].get(self.heads[b]) == Some(&op)
    }

    /// Ops with no pending predecessor, in input order.
    pub fn front(&self) -> Vec<usize> {
        let mut f: Vec<usize> = (0..self.n_logical)
            .filter_map(|q| self.queues[q].get(self.heads[q]).copied())
            .filter(|&op| self.is_ready(op))
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Physical qubit pair of a logical op under the current layout.
    pub fn physical_pair(&self, op: usize) -> (usize, usize) {
        let (a, b) = self.ops[op].pair();
        (self.layout.physical(a), self.layout.physical(b))
    }

    /// As-soon-as-possible layers of the unemitted ops, at most `max_layers`.
    pub fn remaining_layers(&self, max_layers: usize) -> Vec<Vec<usize>> {
        let mut level = vec![0usize; self.n_logical];
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (i, op) in self.ops.iter().enumerate() {
            if self.emitted[i] {
                continue;
            }
            let (a, b) = op.pair();
            let l = level[a].max(level[b]);
            level[a] = l + 1;
            level[b] = l + 1;
            if l < max_layers {
                if layers.len() <= l {
                    layers.resize_with(l + 1, Vec::new);
                }
                layers[l].push(i);
            }
        }
        layers
    }

    fn emit(&mut self, gate: Gate, prov: Provenance) {
        let idx = self.output.len();
        for q in gate.qubits() {
            self.last_gate[q] = Some(idx);
            self.touched[q] = true;
        }
        self.depth.push(&gate);
        self.output.push((gate, prov));
    }

    fn emit_op(&mut self, op: usize) {
        let l2p = self.layout.l2p().to_vec();
        let place = |q: usize| l2p[q];
        let pre = std::mem::take(&mut self.ops[op].pre);
        for &(g, i) in &pre {
            self.emit(g.map_qubits(place), Provenance::Original(i));
        }
        self.ops[op].pre = pre;
        let (gate, index) = (self.ops[op].gate, self.ops[op].index);
        self.emit(gate.map_qubits(place), Provenance::Original(index));
        let (a, b) = self.ops[op].pair();
        self.heads[a] += 1;
        self.heads[b] += 1;
        self.emitted[op] = true;
        self.remaining -= 1;
    }

    /// Emit every front op whose qubits are adjacent, until none is.
    fn pass_through(&mut self) -> usize {
        let mut count = 0;
        loop {
            let ready: Vec<usize> = self
                .front()
                .into_iter()
                .filter(|&op| {
                    let (p, q) = self.physical_pair(op);
                    self.coupling.is_adjacent(p, q)
                })
                .collect();
            if ready.is_empty() {
                return count;
            }
            for op in ready {
                self.emit_op(op);
                count += 1;
            }
        }
    }

    fn finish_if_done(&mut self) {
        if self.remaining == 0 && !self.trailing.is_empty() {
            let trailing = std::mem::take(&mut self.trailing);
            for (g, i) in trailing {
                let g = g.map_qubits(|q| self.layout.physical(q));
                self.emit(g, Provenance::Original(i));
            }
        }
    }

    /// Whether a SWAP on `(p, q)` would only relabel the initial layout.
    pub fn is_layout_swap(&self, p: usize, q: usize) -> bool {
        self.layout_trick && !self.touched[p] && !self.touched[q]
    }

    /// Output index of a gate acting on exactly `{p, q}` that is the last
    /// gate on both qubits.
    fn trailing_pair_gate(&self, p: usize, q: usize) -> Option<usize> {
        match (self.last_gate[p], self.last_gate[q]) {
            (Some(x), Some(y)) if x == y => Some(x),
            _ => None,
        }
    }

    /// CX-equivalents charged for a SWAP on `(p, q)`: 0 when it only rewrites
    /// the initial layout or cancels a trailing inserted SWAP, 2 when it
    /// merges with a trailing CX on the pair, otherwise 3.
    pub fn swap_cx_cost(&self, p: usize, q: usize) -> u32 {
        if self.is_layout_swap(p, q) {
            return 0;
        }
        match self.trailing_pair_gate(p, q).map(|i| self.output[i]) {
            Some((Gate::Swap(..), Provenance::Inserted)) => 0,
            Some((Gate::Cx(..), _)) => 2,
            _ => 3,
        }
    }

    /// Cost of a SWAP, weighted by the config, without applying it.
    pub fn routing_cost(&self, p: usize, q: usize, cfg: &RoutingConfig) -> f64 {
        let units = self.swap_cx_cost(p, q);
        let mut cost = units as f64 * cfg.cx_unit_cost;
        if units == 3 || units == 2 {
            let grows = {
                let mut d = self.depth.clone();
                d.push(&Gate::Swap(p, q)) > self.depth.depth()
            };
            if grows {
                cost += cfg.depth_cost;
            }
        }
        cost
    }

    /// Apply a SWAP on the coupling edge `(p, q)` then pass through every op
    /// that became executable.
    pub fn route_step(&mut self, p: usize, q: usize, cfg: &RoutingConfig) -> Result<RouteStep> {
        if !self.coupling.is_adjacent(p, q) {
            return Err(Error::Routing(format!("swap ({p}, {q}) is not a coupling edge")));
        }
        if self.is_done() {
            return Err(Error::StepAfterDone);
        }
        let cost = self.routing_cost(p, q, cfg);
        if self.is_layout_swap(p, q) {
            self.initial_layout.swap_physical(p, q);
            self.counters.layout_swaps += 1;
        } else if self.swap_cx_cost(p, q) == 0 {
            let idx = self.trailing_pair_gate(p, q).expect("trailing swap");
            self.remove_output(idx);
            self.counters.swaps_cancelled += 1;
        } else {
            self.emit(Gate::Swap(p, q), Provenance::Inserted);
            self.counters.swaps_inserted += 1;
        }
        self.layout.swap_physical(p, q);
        let passed = self.pass_through();
        if passed > 0 {
            self.since_progress = 0;
        } else {
            self.since_progress += 1;
        }
        self.finish_if_done();
        Ok(RouteStep { cost, passed_through: passed, done: self.is_done() })
    }

    fn remove_output(&mut self, idx: usize) {
        self.output.remove(idx);
        let n = self.coupling.n_qubits();
        self.last_gate = vec![None; n];
        self.depth = DepthTracker::new(n);
        for (i, (g, _)) in self.output.iter().enumerate() {
            for q in g.qubits() {
                self.last_gate[q] = Some(i);
            }
            self.depth.push(g);
        }
        // touched flags stay set: the qubits already carried gates
    }

    /// Coupling SWAPs sharing a qubit with a front op; see [`swaps_touching`].
    pub fn active_swaps(&self, limit: usize) -> (Vec<(usize, usize)>, usize) {
        let pairs: Vec<(usize, usize)> = self.front().into_iter().map(|op| self.physical_pair(op)).collect();
        swaps_touching(&self.coupling, &pairs, limit)
    }

    /// `(N, N, H)` tensor: channel `h` marks both orientations of every
    /// physical pair with an op in remaining layer `h`.
    pub fn encode_fixed(&self, n: usize, horizon: usize) -> Result<Observation> {
        let mut obs = Observation::zeros([n, n, horizon]);
        self.encode_fixed_into(n, horizon, &mut obs.data)?;
        Ok(obs)
    }

    pub fn encode_fixed_into(&self, n: usize, horizon: usize, out: &mut [f32]) -> Result<()> {
        if self.coupling.n_qubits() > n {
            return Err(Error::ShapeMismatch {
                expected: format!("at most {n} qubits"),
                got: format!("{} qubits", self.coupling.n_qubits()),
            });
        }
        out.fill(0.0);
        for (h, layer) in self.remaining_layers(horizon).into_iter().enumerate() {
            for op in layer {
                let (p, q) = self.physical_pair(op);
                out[(p * n + q) * horizon + h] = 1.0;
                out[(q * n + p) * horizon + h] = 1.0;
            }
        }
        Ok(())
    }

    /// Change in physical distance of `op` if SWAP `(s, t)` were applied,
    /// positive when the qubits move closer.
    fn distance_gain(&self, op: usize, s: usize, t: usize) -> i32 {
        let (p, q) = self.physical_pair(op);
        let moved = |x: usize| if x == s { t } else if x == t { s } else { x };
        let before = self.coupling.dist(p, q) as i32;
        let after = self.coupling.dist(moved(p), moved(q)) as i32;
        before - after
    }

    /// `(S_a, H)` features: entry `(s, h)` sums the distance gain of active
    /// SWAP `s` over the ops of remaining layer `h`. Also returns the number
    /// of valid rows.
    pub fn encode_generic_into(&self, slots: usize, horizon: usize, out: &mut [f32]) -> usize {
        out.fill(0.0);
        let (swaps, _) = self.active_swaps(slots);
        let layers = self.remaining_layers(horizon);
        for (s, &(a, b)) in swaps.iter().enumerate() {
            for (h, layer) in layers.iter().enumerate() {
                let gain: i32 = layer.iter().map(|&op| self.distance_gain(op, a, b)).sum();
                out[s * horizon + h] = gain as f32;
            }
        }
        swaps.len()
    }

    pub fn encode_generic(&self, cfg: &RoutingConfig) -> Observation {
        let mut obs = Observation::zeros([cfg.max_active_swaps, cfg.horizon, 1]);
        self.encode_generic_into(cfg.max_active_swaps, cfg.horizon, &mut obs.data);
        obs
    }

    /// The routed circuit so far, on physical qubits.
    pub fn circuit(&self) -> Circuit {
        Circuit::from_gates(self.coupling.n_qubits(), self.output.iter().map(|(g, _)| *g).collect())
            .expect("routed gates are in range")
    }

    pub fn provenance(&self) -> Vec<Provenance> {
        self.output.iter().map(|(_, p)| *p).collect()
    }

    /// SWAP that moves the first front op one step along a shortest path.
    pub fn release_swap(&self) -> Option<(usize, usize)> {
        let op = *self.front().first()?;
        let (p, q) = self.physical_pair(op);
        let path = self.coupling.shortest_path(p, q);
        (path.len() > 2).then(|| (path[0], path[1]))
    }
}

/// Undirected coupling edges sharing a qubit with any of `pairs`, in registry
/// order. At most `limit` are returned, together with the number dropped.
pub fn swaps_touching(coupling: &CouplingMap, pairs: &[(usize, usize)], limit: usize) -> (Vec<(usize, usize)>, usize) {
    let mut involved = vec![false; coupling.n_qubits()];
    for &(p, q) in pairs {
        involved[p] = true;
        involved[q] = true;
    }
    let all: Vec<(usize, usize)> =
        coupling.undirected_edges().iter().copied().filter(|&(a, b)| involved[a] || involved[b]).collect();
    let overflow = all.len().saturating_sub(limit);
    (all.into_iter().take(limit).collect(), overflow)
}
