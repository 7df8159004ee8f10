//! Qubit routing: SWAP insertion so every two-qubit gate lies on a coupling edge.

mod env;
mod qv;
mod sabre;
mod seed;
mod state;
mod verify;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::topology::Layout;

pub use env::{
    bidirectional_route, route_budgeted, route_with_policy, RouteMode, RoutingEnv, RoutingPolicy, RoutingVariant,
};
pub use qv::{qv_circuit, random_two_qubit_circuit};
pub use sabre::{sabre_lite, SabreConfig};
pub use seed::path_embedding_layout;
pub use state::{swaps_touching, Provenance, RouteStep, RoutingCounters, RoutingState};
pub use verify::{finalize_route, VerificationReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingConfig {
    /// Remaining layers visible to the policy.
    pub horizon: usize,
    /// Candidate SWAP slots of the generic variant.
    pub max_active_swaps: usize,
    pub success_reward: f64,
    /// Penalty per CX-equivalent; a bare SWAP costs three units.
    pub cx_unit_cost: f64,
    /// Penalty when a SWAP grows the two-qubit depth of the output.
    pub depth_cost: f64,
    /// Layer count of the circuits drawn at maximum difficulty.
    pub target_layers: usize,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            horizon: 8,
            max_active_swaps: 32,
            success_reward: 10.0,
            cx_unit_cost: 0.1,
            depth_cost: 0.1,
            target_layers: 3,
        }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("routing.horizon", "must be at least 1"));
        }
        if self.max_active_swaps == 0 {
            return Err(Error::config("routing.max_active_swaps", "must be at least 1"));
        }
        if self.target_layers == 0 {
            return Err(Error::config("routing.target_layers", "must be at least 1"));
        }
        for (name, v) in [("cx_unit_cost", self.cx_unit_cost), ("depth_cost", self.depth_cost)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("routing.{name}"), "must be finite and non-negative"));
            }
        }
        if !(self.success_reward.is_finite() && self.success_reward >= 0.0) {
            return Err(Error::config("routing.success_reward", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Two-qubit metrics of a routed circuit with SWAPs lowered to CX.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteMetrics {
    pub count2q: usize,
    pub depth2q: usize,
    pub swaps: usize,
    #[serde(flatten)]
    pub counters: RoutingCounters,
}

/// A routed circuit on physical qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedResult {
    pub circuit: Circuit,
    pub provenance: Vec<Provenance>,
    pub initial_layout: Layout,
    pub final_layout: Layout,
    pub metrics: RouteMetrics,
}

impl RoutedResult {
    pub fn from_state(state: &RoutingState) -> Result<Self> {
        if !state.is_done() {
            return Err(Error::Routing(format!("{} ops left unrouted", state.remaining_ops())));
        }
        let circuit = state.circuit();
        let lowered = lower_swaps(&circuit);
        let metrics = RouteMetrics {
            count2q: lowered.count2q(),
            depth2q: lowered.depth2q(),
            swaps: state.provenance().iter().filter(|p| **p == Provenance::Inserted).count(),
            counters: state.counters,
        };
        Ok(RoutedResult {
            circuit,
            provenance: state.provenance(),
            initial_layout: state.initial_layout().clone(),
            final_layout: state.layout().clone(),
            metrics,
        })
    }

    /// Ordering key used to pick the best of several routings.
    pub fn key(&self) -> (usize, usize) {
        (self.metrics.depth2q, self.metrics.count2q)
    }

    /// Gate order reversed with the layouts exchanged. Routing the reversed
    /// input and reversing the result gives a routing of the input.
    pub fn reversed(&self, n_input_gates: usize) -> RoutedResult {
        let gates: Vec<Gate> = self.circuit.gates().iter().rev().copied().collect();
        let provenance = self
            .provenance
            .iter()
            .rev()
            .map(|p| match *p {
                Provenance::Original(i) => Provenance::Original(n_input_gates - 1 - i),
                Provenance::Inserted => Provenance::Inserted,
            })
            .collect();
        let circuit = Circuit::from_gates(self.circuit.n_qubits(), gates).expect("same register");
        let lowered = lower_swaps(&circuit);
        RoutedResult {
            metrics: RouteMetrics { count2q: lowered.count2q(), depth2q: lowered.depth2q(), ..self.metrics },
            circuit,
            provenance,
            initial_layout: self.final_layout.clone(),
            final_layout: self.initial_layout.clone(),
        }
    }
}

/// Input gates in reverse order.
pub fn reverse_circuit(c: &Circuit) -> Circuit {
    Circuit::from_gates(c.n_qubits(), c.gates().iter().rev().copied().collect()).expect("same register")
}

/// Rewrite SWAPs as three CX oriented to cancel against a CX on the same pair
/// directly before or after, then drop the cancelled pairs.
pub fn lower_swaps(c: &Circuit) -> Circuit {
    let n = c.n_qubits();
    let gates = c.gates();
    let pair_cx = |i: Option<usize>, a: usize, b: usize| match i.map(|i| gates[i]) {
        Some(Gate::Cx(x, y)) if (x, y) == (a, b) || (x, y) == (b, a) => Some((x, y)),
        _ => None,
    };
    let mut next: Vec<[Option<usize>; 2]> = vec![[None, None]; gates.len()];
    let mut upcoming: Vec<Option<usize>> = vec![None; n];
    for (i, g) in gates.iter().enumerate().rev() {
        if let Gate::Swap(a, b) = *g {
            next[i] = [upcoming[a], upcoming[b]];
        }
        for q in g.qubits() {
            upcoming[q] = Some(i);
        }
    }
    let mut previous: Vec<Option<usize>> = vec![None; n];
    // (gate, came from a SWAP)
    let mut out: Vec<Option<(Gate, bool)>> = Vec::with_capacity(gates.len());
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut push = |out: &mut Vec<Option<(Gate, bool)>>, g: Gate, lowered: bool| {
        if let Gate::Cx(a, b) = g {
            if let (Some(&x), Some(&y)) = (stacks[a].last(), stacks[b].last()) {
                if x == y {
                    if let Some((h, was_lowered)) = out[x] {
                        if h == g && (lowered || was_lowered) {
                            out[x] = None;
                            stacks[a].pop();
                            stacks[b].pop();
                            return;
                        }
                    }
                }
            }
        }
        for q in g.qubits() {
            stacks[q].push(out.len());
        }
        out.push(Some((g, lowered)));
    };
    for (i, g) in gates.iter().enumerate() {
        if let Gate::Swap(a, b) = *g {
            let before = match (previous[a], previous[b]) {
                (Some(x), Some(y)) if x == y => pair_cx(Some(x), a, b),
                _ => None,
            };
            let after = match next[i] {
                [Some(x), Some(y)] if x == y => pair_cx(Some(x), a, b),
                _ => None,
            };
            let (x, y) = before.or(after).unwrap_or((a, b));
            for g in [Gate::Cx(x, y), Gate::Cx(y, x), Gate::Cx(x, y)] {
                push(&mut out, g, true);
            }
        } else {
            push(&mut out, *g, false);
        }
        for q in g.qubits() {
            previous[q] = Some(i);
        }
    }
    Circuit::from_gates(n, out.into_iter().flatten().map(|(g, _)| g).collect()).expect("same register")
}
