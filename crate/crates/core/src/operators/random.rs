use rand::Rng;

use crate::circuit::Gate;
use crate::error::{Error, Result};

use super::{CliffordOp, Operator};

/// Apply `difficulty` uniformly drawn actions to the identity.
pub fn random_target<O: Operator, R: Rng + ?Sized>(
    n_qubits: usize,
    difficulty: usize,
    actions: &[Gate],
    rng: &mut R,
) -> Result<O> {
    if difficulty == 0 {
        return Err(Error::ZeroDifficulty);
    }
    let mut op = O::identity(n_qubits);
    for _ in 0..difficulty {
        let g = &actions[rng.gen_range(0..actions.len())];
        op.apply_gate(g)?;
    }
    Ok(op)
}

pub fn uniform_walk_length(n_qubits: usize) -> usize {
    40 * n_qubits * n_qubits
}

/// Approximately uniform Clifford from a lazy random walk over H, S and CX
/// on all qubit pairs. The idle move keeps the walk aperiodic.
pub fn random_uniform_clifford<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> CliffordOp {
    let n = n_qubits;
    let n_moves = 2 * n + n * (n - 1) + 1;
    let mut op = CliffordOp::identity(n);
    for _ in 0..uniform_walk_length(n) {
        let m = rng.gen_range(0..n_moves);
        let g = if m < n {
            Gate::H(m)
        } else if m < 2 * n {
            Gate::S(m - n)
        } else if m < n_moves - 1 {
            let k = m - 2 * n;
            let c = k / (n - 1);
            let t = k % (n - 1);
            Gate::Cx(c, if t >= c { t + 1 } else { t })
        } else {
            continue;
        };
        op.apply_gate(&g).expect("walk gates are in range");
    }
    op
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::operators::PermutationOp;

    #[test]
    fn zero_difficulty_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = random_target::<PermutationOp, _>(3, 0, &[Gate::Swap(0, 1)], &mut rng);
        assert!(matches!(r, Err(Error::ZeroDifficulty)));
    }

    #[test]
    fn single_action_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let acts = [Gate::Swap(0, 1), Gate::Swap(1, 2)];
        for _ in 0..20 {
            let p: PermutationOp = random_target(3, 1, &acts, &mut rng).unwrap();
            assert!(p.mapping() == [1, 0, 2] || p.mapping() == [0, 2, 1]);
        }
    }

    #[test]
    fn one_qubit_uniformity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let samples = 10_000;
        let mut counts = HashMap::new();
        for _ in 0..samples {
            let c = random_uniform_clifford(1, &mut rng);
            assert!(c.is_symplectic());
            *counts.entry(c.key()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for &k in counts.values() {
            let f = k as f64 / samples as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn walk_visits_every_gate() {
        // n = 3 has 3 H, 3 S, 6 CX and one idle move
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            assert!(random_uniform_clifford(3, &mut rng).is_symplectic());
        }
        assert_eq!(uniform_walk_length(7), 1960);
    }
}
