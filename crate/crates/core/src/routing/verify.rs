use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::oracles::{dense_simulate, DenseUnitary, MAX_DENSE_QUBITS};
use crate::topology::{CouplingMap, Layout};

use super::{Provenance, RoutedResult};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub legal: bool,
    pub permutation: bool,
    /// `None` when the register is too large for dense simulation.
    pub dense: Option<bool>,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.legal && self.permutation && self.dense != Some(false)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::Verification(self.failures.join("; ")))
        }
    }
}

fn check_legal(result: &RoutedResult, coupling: &CouplingMap) -> std::result::Result<(), String> {
    if result.circuit.n_qubits() != coupling.n_qubits() {
        return Err(format!(
            "routed circuit has {} qubits, coupling map {}",
            result.circuit.n_qubits(),
            coupling.n_qubits()
        ));
    }
    for (i, g) in result.circuit.gates().iter().enumerate() {
        if let Gate::Cx(a, b) | Gate::Swap(a, b) = *g {
            if !coupling.is_adjacent(a, b) {
                return Err(format!("gate {i} ({g}) is not on a coupling edge"));
            }
        }
    }
    Ok(())
}

/// Replay with inserted SWAPs as relabelings; every original gate must land
/// where the tracked layout puts it, in an order that respects each qubit.
fn check_permutation(result: &RoutedResult, original: &Circuit) -> std::result::Result<(), String> {
    if result.provenance.len() != result.circuit.len() {
        return Err("provenance length differs from circuit length".into());
    }
    let n_phys = result.circuit.n_qubits();
    if result.initial_layout.len() != n_phys || result.final_layout.len() != n_phys {
        return Err("layouts do not cover the physical register".into());
    }
    let mut layout = result.initial_layout.clone();
    let mut seen = vec![false; original.len()];
    let mut last_on_qubit: Vec<Option<usize>> = vec![None; original.n_qubits()];
    for (pos, (g, p)) in result.circuit.gates().iter().zip(&result.provenance).enumerate() {
        match *p {
            Provenance::Inserted => match *g {
                Gate::Swap(a, b) => layout.swap_physical(a, b),
                _ => return Err(format!("inserted gate {pos} ({g}) is not a SWAP")),
            },
            Provenance::Original(i) => {
                let Some(src) = original.gates().get(i) else {
                    return Err(format!("gate {pos} refers to input gate {i} which does not exist"));
                };
                if std::mem::replace(&mut seen[i], true) {
                    return Err(format!("input gate {i} emitted twice"));
                }
                let expected = src.map_qubits(|q| layout.physical(q));
                if expected != *g {
                    return Err(format!("gate {pos} is {g}, tracked layout expects {expected}"));
                }
                for q in src.qubits() {
                    if last_on_qubit[q].is_some_and(|j| j > i) {
                        return Err(format!("input gate {i} emitted out of order on qubit {q}"));
                    }
                    last_on_qubit[q] = Some(i);
                }
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(format!("input gate {i} missing from the output"));
    }
    if layout != result.final_layout {
        return Err(format!("tracked final layout {:?} differs from reported {:?}", layout.l2p(), result.final_layout.l2p()));
    }
    Ok(())
}

fn placement(layout: &Layout) -> DenseUnitary {
    DenseUnitary::qubit_permutation(layout.l2p())
}

/// `R * P(initial) == P(final) * C` with `C` padded to the physical register.
fn check_dense(result: &RoutedResult, original: &Circuit) -> std::result::Result<(), String> {
    let n = result.circuit.n_qubits();
    let padded = Circuit::from_gates(n, original.gates().to_vec()).map_err(|e| e.to_string())?;
    let r = dense_simulate(&result.circuit).map_err(|e| e.to_string())?;
    let c = dense_simulate(&padded).map_err(|e| e.to_string())?;
    let lhs = r.mul(&placement(&result.initial_layout));
    let rhs = placement(&result.final_layout).mul(&c);
    if lhs.approx_eq(&rhs, 1e-9) {
        Ok(())
    } else {
        Err(format!("dense unitaries differ by {:.3e}", lhs.max_diff(&rhs)))
    }
}

/// Check a routing against the circuit it claims to implement.
pub fn finalize_route(result: &RoutedResult, original: &Circuit, coupling: &CouplingMap) -> VerificationReport {
    let mut report = VerificationReport::default();
    match check_legal(result, coupling) {
        Ok(()) => report.legal = true,
        Err(e) => report.failures.push(format!("legality: {e}")),
    }
    if original.n_qubits() > result.circuit.n_qubits() {
        report.failures.push("input circuit is wider than the routed register".into());
        return report;
    }
    match check_permutation(result, original) {
        Ok(()) => report.permutation = true,
        Err(e) => report.failures.push(format!("permutation: {e}")),
    }
    if result.circuit.n_qubits() <= MAX_DENSE_QUBITS && report.legal {
        let ok = check_dense(result, original);
        if let Err(e) = &ok {
            report.failures.push(format!("dense: {e}"));
        }
        report.dense = Some(ok.is_ok());
    }
    report
}
