use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::topology::{CouplingMap, Layout};

use super::{RoutedResult, RoutingConfig, RoutingState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SabreConfig {
    pub lookahead_weight: f64,
    /// Ops considered beyond the front.
    pub extended_size: usize,
    pub decay: f64,
    /// Steps between decay resets.
    pub decay_reset: usize,
}

impl Default for SabreConfig {
    fn default() -> Self {
        SabreConfig { lookahead_weight: 0.5, extended_size: 20, decay: 0.001, decay_reset: 5 }
    }
}

impl SabreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lookahead_weight.is_finite() && self.lookahead_weight >= 0.0) {
            return Err(Error::config("sabre.lookahead_weight", "must be finite and non-negative"));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::config("sabre.decay", "must be finite and non-negative"));
        }
        if self.decay_reset == 0 {
            return Err(Error::config("sabre.decay_reset", "must be at least 1"));
        }
        Ok(())
    }
}

fn window_ops(state: &RoutingState, size: usize) -> (Vec<usize>, Vec<usize>) {
    let mut layers = state.remaining_layers(usize::MAX).into_iter();
    let front = layers.next().unwrap_or_default();
    let extended = layers.flatten().take(size).collect();
    (front, extended)
}

fn distance_sum(state: &RoutingState, ops: &[usize], s: usize, t: usize) -> f64 {
    let moved = |x: usize| if x == s { t } else if x == t { s } else { x };
    ops.iter()
        .map(|&op| {
            let (p, q) = state.physical_pair(op);
            state.coupling().dist(moved(p), moved(q)) as f64
        })
        .sum()
}

/// SWAP chosen by the distance heuristic, ties broken by registry order.
pub(crate) fn sabre_choice(state: &RoutingState, cfg: &SabreConfig, decay: &[f64]) -> Option<(usize, usize)> {
    let (front, extended) = window_ops(state, cfg.extended_size);
    let (candidates, _) = state.active_swaps(usize::MAX);
    let mut best: Option<(f64, (usize, usize))> = None;
    for (s, t) in candidates {
        let mut h = distance_sum(state, &front, s, t) / front.len().max(1) as f64;
        if !extended.is_empty() {
            h += cfg.lookahead_weight * distance_sum(state, &extended, s, t) / extended.len() as f64;
        }
        let score = decay[s].max(decay[t]) * h;
        if best.is_none_or(|(b, _)| score < b - 1e-12) {
            best = Some((score, (s, t)));
        }
    }
    best.map(|(_, st)| st)
}

/// Drive an existing state to completion with the distance heuristic.
pub(crate) fn sabre_finish(state: &mut RoutingState, cfg: &SabreConfig) -> Result<()> {
    let costs = RoutingConfig::default();
    let mut decay = vec![1.0; state.coupling().n_qubits()];
    let mut since_reset = 0;
    while !state.is_done() {
        let swap = if state.is_stalled() {
            state.counters.fallback_steps += 1;
            state.release_swap()
        } else {
            sabre_choice(state, cfg, &decay)
        };
        let (s, t) = swap.ok_or_else(|| Error::Routing("no candidate swap".into()))?;
        let step = state.route_step(s, t, &costs)?;
        since_reset += 1;
        if step.passed_through > 0 || since_reset >= cfg.decay_reset {
            decay.fill(1.0);
            since_reset = 0;
        } else {
            decay[s] += cfg.decay;
            decay[t] += cfg.decay;
        }
    }
    Ok(())
}

/// Distance-heuristic router with lookahead and decay.
pub fn sabre_lite(
    circuit: &Circuit,
    coupling: &Arc<CouplingMap>,
    initial: Layout,
    cfg: &SabreConfig,
) -> Result<RoutedResult> {
    cfg.validate()?;
    let mut state = RoutingState::new(circuit, Arc::clone(coupling), initial, false)?;
    sabre_finish(&mut state, cfg)?;
    RoutedResult::from_state(&state)
}
