use std::collections::HashMap;

use proptest::prelude::*;
use qrl_core::bitmatrix::BitMatrix;
use qrl_core::oracles::{clifford_from_unitary, dense_simulate, linear_from_unitary, permutation_from_unitary};
use qrl_core::operators::random_uniform_clifford;
use qrl_core::{Circuit, CliffordOp, Gate, LinearOp, Operator, PermutationOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    let a = rng.gen_range(0..n);
    (a, (a + rng.gen_range(1..n)) % n)
}

fn random_circuit(kind: u8, n: usize, len: usize, rng: &mut impl Rng) -> Circuit {
    let gates = (0..len)
        .map(|_| {
            let (a, b) = pair(n, rng);
            match kind {
                b'p' => Gate::Swap(a, b),
                b'l' => Gate::Cx(a, b),
                _ => match rng.gen_range(0..3) {
                    0 => Gate::H(a),
                    1 => Gate::S(a),
                    _ => Gate::Cx(a, b),
                },
            }
        })
        .collect();
    Circuit::from_gates(n, gates).unwrap()
}

#[test]
fn engines_agree_with_dense_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [2, 3] {
        for _ in 0..200 {
            let len = rng.gen_range(0..24);
            let c = random_circuit(b'c', n, len, &mut rng);
            let u = dense_simulate(&c).unwrap();
            assert_eq!(clifford_from_unitary(&u).unwrap(), CliffordOp::from_gates(n, c.gates()).unwrap());

            let c = random_circuit(b'l', n, len, &mut rng);
            let u = dense_simulate(&c).unwrap();
            assert_eq!(linear_from_unitary(&u).unwrap(), LinearOp::from_gates(n, c.gates()).unwrap());

            let c = random_circuit(b'p', n, len, &mut rng);
            let u = dense_simulate(&c).unwrap();
            assert_eq!(permutation_from_unitary(&u).unwrap(), PermutationOp::from_gates(n, c.gates()).unwrap());
        }
    }
}

fn symplectic_group(n: usize) -> Vec<BitMatrix> {
    let dim = 2 * n;
    let mut out = Vec::new();
    for bits in 0u64..1 << (dim * dim) {
        let rows: Vec<Vec<bool>> =
            (0..dim).map(|r| (0..dim).map(|c| bits >> (r * dim + c) & 1 == 1).collect()).collect();
        let m = BitMatrix::from_rows(&rows);
        if CliffordOp::from_parts(m.clone(), vec![false; dim]).is_ok() {
            out.push(m);
        }
    }
    out
}

#[test]
fn symplectic_group_orders() {
    assert_eq!(symplectic_group(1).len(), 6);
    assert_eq!(symplectic_group(2).len(), 720);
}

#[test]
fn two_qubit_sampler_is_near_uniform() {
    let group = symplectic_group(2);
    let mut counts: HashMap<BitMatrix, usize> = group.into_iter().map(|m| (m, 0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let samples = 100_000;
    for _ in 0..samples {
        let c = random_uniform_clifford(2, &mut rng);
        *counts.get_mut(c.matrix()).expect("sample is symplectic") += 1;
    }
    let uniform = 1.0 / counts.len() as f64;
    let tv: f64 = counts.values().map(|&k| (k as f64 / samples as f64 - uniform).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.05, "total variation {tv}");
}

proptest! {
    #[test]
    fn tableau_stays_symplectic(seed in any::<u64>(), n in 1usize..6, len in 0usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gates: Vec<Gate> = (0..len).map(|_| {
            let a = rng.gen_range(0..n);
            match rng.gen_range(0..3) {
                0 => Gate::H(a),
                1 => Gate::S(a),
                _ if n > 1 => Gate::Cx(a, (a + rng.gen_range(1..n)) % n),
                _ => Gate::H(a),
            }
        }).collect();
        let op = CliffordOp::from_gates(n, &gates).unwrap();
        prop_assert!(op.is_symplectic());
        prop_assert_eq!(op.is_identity(), op.encode() == CliffordOp::identity(n).encode());
    }

    #[test]
    fn linear_stays_invertible(seed in any::<u64>(), n in 2usize..9, len in 0usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gates: Vec<Gate> = (0..len).map(|_| { let (a, b) = pair(n, &mut rng); Gate::Cx(a, b) }).collect();
        let op = LinearOp::from_gates(n, &gates).unwrap();
        prop_assert!(op.matrix().is_invertible());
        prop_assert_eq!(op.is_identity(), op.encode() == LinearOp::identity(n).encode());
    }

    #[test]
    fn fix_phase_clears_any_identity_phase(bits in 0u32..64) {
        let mut op = CliffordOp::identity(3);
        for r in 0..6 {
            op.set_phase(r, bits >> r & 1 == 1);
        }
        for g in op.fix_phase().unwrap() {
            op.apply_gate(&g).unwrap();
        }
        prop_assert!(op.is_exact_identity());
    }
}
