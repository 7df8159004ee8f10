use crate::bitmatrix::BitMatrix;
use crate::circuit::Gate;
use crate::error::{Error, Result};

use super::{check_qubits, Operator, OperatorKind};

/// Invertible GF(2) matrix acting on computational basis states, `|x> -> |Mx>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearOp {
    matrix: BitMatrix,
}

impl LinearOp {
    pub fn from_matrix(matrix: BitMatrix) -> Result<Self> {
        if !matrix.is_invertible() {
            return Err(Error::Verification("linear function matrix is singular".into()));
        }
        Ok(LinearOp { matrix })
    }

    pub fn matrix(&self) -> &BitMatrix {
        &self.matrix
    }
}

impl Operator for LinearOp {
    type Key = BitMatrix;
    const KIND: OperatorKind = OperatorKind::Linear;

    fn identity(n: usize) -> Self {
        LinearOp { matrix: BitMatrix::identity(n) }
    }

    fn n_qubits(&self) -> usize {
        self.matrix.rows()
    }

    fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        check_qubits(gate, self.n_qubits())?;
        let Gate::Cx(c, t) = *gate else {
            return Err(Error::IllegalGate { gate: gate.to_string(), kind: "linear" });
        };
        self.matrix.xor_row(t, c);
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.matrix.is_identity()
    }

    fn key(&self) -> BitMatrix {
        self.matrix.clone()
    }

    fn obs_shape(n: usize) -> [usize; 3] {
        [n, n, 1]
    }

    fn encode_into(&self, out: &mut [f32]) {
        let n = self.n_qubits();
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = if self.matrix.get(r, c) { 1.0 } else { 0.0 };
            }
        }
    }
}
