use crate::circuit::Gate;
use crate::error::{Error, Result};

use super::{check_qubits, Operator, OperatorKind};

/// A qubit permutation; `mapping[i]` is the wire that carries qubit `i`'s state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PermutationOp {
    mapping: Vec<usize>,
    inverse: Vec<usize>,
}

impl PermutationOp {
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &m) in mapping.iter().enumerate() {
            if m >= n || inverse[m] != usize::MAX {
                return Err(Error::Verification(format!("{mapping:?} is not a permutation")));
            }
            inverse[m] = i;
        }
        Ok(PermutationOp { mapping, inverse })
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }
}

impl Operator for PermutationOp {
    type Key = Vec<usize>;
    const KIND: OperatorKind = OperatorKind::Permutation;

    fn identity(n: usize) -> Self {
        PermutationOp { mapping: (0..n).collect(), inverse: (0..n).collect() }
    }

    fn n_qubits(&self) -> usize {
        self.mapping.len()
    }

    fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        check_qubits(gate, self.n_qubits())?;
        let Gate::Swap(a, b) = *gate else {
            return Err(Error::IllegalGate { gate: gate.to_string(), kind: "permutation" });
        };
        let (i, j) = (self.inverse[a], self.inverse[b]);
        self.mapping[i] = b;
        self.mapping[j] = a;
        self.inverse.swap(a, b);
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    fn key(&self) -> Vec<usize> {
        self.mapping.clone()
    }

    fn obs_shape(n: usize) -> [usize; 3] {
        [n, n, 1]
    }

    fn encode_into(&self, out: &mut [f32]) {
        let n = self.n_qubits();
        out.fill(0.0);
        for (i, &m) in self.mapping.iter().enumerate() {
            out[i * n + m] = 1.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_is_involution() {
        let mut p = PermutationOp::identity(4);
        p.apply_gate(&Gate::Swap(1, 2)).unwrap();
        assert!(!p.is_identity());
        assert_eq!(p.mapping(), &[0, 2, 1, 3]);
        p.apply_gate(&Gate::Swap(2, 1)).unwrap();
        assert!(p.is_identity());
    }

    #[test]
    fn swaps_compose_in_time_order() {
        // qubit 0 travels 0 -> 1 -> 2
        let p = PermutationOp::from_gates(3, &[Gate::Swap(0, 1), Gate::Swap(1, 2)]).unwrap();
        assert_eq!(p.mapping(), &[2, 0, 1]);
    }

    #[test]
    fn rejects_other_gates() {
        let mut p = PermutationOp::identity(3);
        assert!(matches!(p.apply_gate(&Gate::Cx(0, 1)), Err(Error::IllegalGate { .. })));
        assert!(p.apply_gate(&Gate::Swap(0, 3)).is_err());
    }

    #[test]
    fn encoding_is_one_hot_and_injective() {
        let a = PermutationOp::from_mapping(vec![1, 2, 0]).unwrap();
        let b = PermutationOp::from_mapping(vec![2, 0, 1]).unwrap();
        let ea = a.encode();
        assert_eq!(ea.shape, [3, 3, 1]);
        assert_eq!(ea.data.iter().sum::<f32>(), 3.0);
        assert_eq!(ea.at(0, 1, 0), 1.0);
        assert_ne!(ea, b.encode());
    }
}
