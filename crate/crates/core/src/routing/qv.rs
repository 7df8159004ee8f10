use rand::seq::SliceRandom;
use rand::Rng;

use crate::circuit::{Circuit, Gate};

fn random_single<R: Rng + ?Sized>(q: usize, rng: &mut R, out: &mut Vec<Gate>) {
    match rng.gen_range(0..3) {
        0 => out.push(Gate::H(q)),
        1 => out.push(Gate::S(q)),
        _ => {}
    }
}

/// Layered random circuit: each layer pairs the qubits at random and applies
/// a three-CX block with random H/S gates between the CX to every pair.
pub fn qv_circuit<R: Rng + ?Sized>(n_qubits: usize, layers: usize, rng: &mut R) -> Circuit {
    let mut gates = Vec::new();
    let mut order: Vec<usize> = (0..n_qubits).collect();
    for _ in 0..layers {
        order.shuffle(rng);
        for pair in order.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            for cx in [Gate::Cx(a, b), Gate::Cx(b, a), Gate::Cx(a, b)] {
                random_single(a, rng, &mut gates);
                random_single(b, rng, &mut gates);
                gates.push(cx);
            }
            random_single(a, rng, &mut gates);
            random_single(b, rng, &mut gates);
        }
    }
    Circuit::from_gates(n_qubits, gates).expect("qubits in range")
}

/// `count` CX gates on uniformly random ordered pairs of distinct qubits.
pub fn random_two_qubit_circuit<R: Rng + ?Sized>(n_qubits: usize, count: usize, rng: &mut R) -> Circuit {
    assert!(n_qubits >= 2, "need at least two qubits");
    let gates = (0..count)
        .map(|_| {
            let a = rng.gen_range(0..n_qubits);
            let mut b = rng.gen_range(0..n_qubits - 1);
            if b >= a {
                b += 1;
            }
            Gate::Cx(a, b)
        })
        .collect();
    Circuit::from_gates(n_qubits, gates).expect("qubits in range")
}
