use crate::bitmatrix::BitMatrix;
use crate::circuit::Gate;
use crate::error::{Error, Result};

use super::{check_qubits, Operator, OperatorKind};

/// Clifford tableau. Row `i < n` is the image of `X_i` (destabilizer), row
/// `n + i` the image of `Z_i` (stabilizer). Columns `0..n` hold X bits and
/// `n..2n` Z bits; `phase[r]` is the sign bit of row `r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CliffordOp {
    n: usize,
    matrix: BitMatrix,
    phase: Vec<bool>,
}

impl CliffordOp {
    pub fn from_parts(matrix: BitMatrix, phase: Vec<bool>) -> Result<Self> {
        let n = matrix.rows() / 2;
        if matrix.rows() != 2 * n || matrix.cols() != 2 * n || phase.len() != 2 * n {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} matrix and {0} phase bits", 2 * n),
                got: format!("{}x{} matrix and {} phase bits", matrix.rows(), matrix.cols(), phase.len()),
            });
        }
        let op = CliffordOp { n, matrix, phase };
        if !op.is_symplectic() {
            return Err(Error::Verification("tableau is not symplectic".into()));
        }
        Ok(op)
    }

    pub fn matrix(&self) -> &BitMatrix {
        &self.matrix
    }

    pub fn phase(&self) -> &[bool] {
        &self.phase
    }

    pub fn set_phase(&mut self, row: usize, v: bool) {
        self.phase[row] = v;
    }

    #[inline]
    fn x(&self, r: usize, q: usize) -> bool {
        self.matrix.get(r, q)
    }

    #[inline]
    fn z(&self, r: usize, q: usize) -> bool {
        self.matrix.get(r, self.n + q)
    }

    /// Symplectic inner product of two tableau rows.
    fn row_product(&self, a: usize, b: usize) -> bool {
        let mut acc = false;
        for q in 0..self.n {
            acc ^= (self.x(a, q) & self.z(b, q)) ^ (self.z(a, q) & self.x(b, q));
        }
        acc
    }

    /// Rows pair up as anticommuting `(X_i, Z_i)` images and commute otherwise.
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        (0..2 * n).all(|a| {
            (a..2 * n).all(|b| {
                let expect = b == a + n && a < n;
                self.row_product(a, b) == expect
            })
        })
    }

    /// Single-qubit gates that clear the phase vector of a tableau whose
    /// matrix is already the identity. A `Z` flips the `X_i` row sign and an
    /// `X` flips the `Z_i` row sign.
    pub fn fix_phase(&self) -> Result<Vec<Gate>> {
        if !self.matrix.is_identity() {
            return Err(Error::MatrixNotIdentity);
        }
        let mut gates = Vec::new();
        for q in 0..self.n {
            if self.phase[q] {
                gates.extend([Gate::S(q), Gate::S(q)]);
            }
            if self.phase[self.n + q] {
                gates.extend([Gate::H(q), Gate::S(q), Gate::S(q), Gate::H(q)]);
            }
        }
        Ok(gates)
    }

    /// True when the matrix is the identity and every phase bit is clear.
    pub fn is_exact_identity(&self) -> bool {
        self.matrix.is_identity() && self.phase.iter().all(|&p| !p)
    }
}

impl Operator for CliffordOp {
    type Key = BitMatrix;
    const KIND: OperatorKind = OperatorKind::Clifford;

    fn identity(n: usize) -> Self {
        CliffordOp { n, matrix: BitMatrix::identity(2 * n), phase: vec![false; 2 * n] }
    }

    fn n_qubits(&self) -> usize {
        self.n
    }

    fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        check_qubits(gate, self.n)?;
        let n = self.n;
        match *gate {
            Gate::H(a) => {
                for r in 0..2 * n {
                    let (x, z) = (self.x(r, a), self.z(r, a));
                    self.phase[r] ^= x & z;
                    self.matrix.set(r, a, z);
                    self.matrix.set(r, n + a, x);
                }
            }
            Gate::S(a) => {
                for r in 0..2 * n {
                    let (x, z) = (self.x(r, a), self.z(r, a));
                    self.phase[r] ^= x & z;
                    self.matrix.set(r, n + a, z ^ x);
                }
            }
            Gate::Cx(c, t) => {
                for r in 0..2 * n {
                    let (xc, zc, xt, zt) = (self.x(r, c), self.z(r, c), self.x(r, t), self.z(r, t));
                    self.phase[r] ^= xc & zt & !(xt ^ zc);
                    self.matrix.set(r, t, xt ^ xc);
                    self.matrix.set(r, n + c, zc ^ zt);
                }
            }
            Gate::Swap(..) => {
                return Err(Error::IllegalGate { gate: gate.to_string(), kind: "clifford" });
            }
        }
        Ok(())
    }

    fn max_difficulty_target<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Option<Self> {
        Some(super::random_uniform_clifford(n, rng))
    }

    fn is_identity(&self) -> bool {
        self.matrix.is_identity()
    }

    fn residual_correction(&self) -> Vec<Gate> {
        self.fix_phase().unwrap_or_default()
    }

    fn key(&self) -> BitMatrix {
        self.matrix.clone()
    }

    fn obs_shape(n: usize) -> [usize; 3] {
        [n, n, 4]
    }

    /// Channels are the XX, XZ, ZX and ZZ quadrants of the matrix.
    fn encode_into(&self, out: &mut [f32]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let base = (i * n + j) * 4;
                let quads = [(i, j), (i, n + j), (n + i, j), (n + i, n + j)];
                for (ch, (r, c)) in quads.into_iter().enumerate() {
                    out[base + ch] = if self.matrix.get(r, c) { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gate(n: usize, rng: &mut impl Rng) -> Gate {
        match rng.gen_range(0..3) {
            0 => Gate::H(rng.gen_range(0..n)),
            1 => Gate::S(rng.gen_range(0..n)),
            _ => {
                let c = rng.gen_range(0..n);
                let t = (c + rng.gen_range(1..n)) % n;
                Gate::Cx(c, t)
            }
        }
    }

    #[test]
    fn hadamard_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gates: Vec<Gate> = (0..30).map(|_| random_gate(3, &mut rng)).collect();
        let op = CliffordOp::from_gates(3, &gates).unwrap();
        for q in 0..3 {
            let mut twice = op.clone();
            twice.apply_gate(&Gate::H(q)).unwrap();
            twice.apply_gate(&Gate::H(q)).unwrap();
            assert_eq!(twice, op);
        }
    }

    #[test]
    fn s_has_order_four() {
        let mut op = CliffordOp::identity(1);
        op.apply_gate(&Gate::H(0)).unwrap();
        let start = op.clone();
        for k in 1..=4 {
            op.apply_gate(&Gate::S(0)).unwrap();
            assert_eq!(op == start, k == 4);
        }
    }

    #[test]
    fn known_images() {
        // H maps X to Z; S maps X to Y with positive sign.
        let h = CliffordOp::from_gates(1, &[Gate::H(0)]).unwrap();
        assert!(!h.x(0, 0) && h.z(0, 0) && !h.phase[0]);
        let s = CliffordOp::from_gates(1, &[Gate::S(0)]).unwrap();
        assert!(s.x(0, 0) && s.z(0, 0) && !s.phase[0]);
        // Z = SS flips the sign of X.
        let z = CliffordOp::from_gates(1, &[Gate::S(0), Gate::S(0)]).unwrap();
        assert!(z.is_identity());
        assert_eq!(z.phase(), &[true, false]);
    }

    #[test]
    fn identity_ignores_phase() {
        let mut op = CliffordOp::identity(2);
        op.set_phase(1, true);
        assert!(op.is_identity());
        assert!(!op.is_exact_identity());
        assert_eq!(op.encode(), CliffordOp::identity(2).encode());
    }

    #[test]
    fn stays_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..6 {
            let mut op = CliffordOp::identity(n);
            for _ in 0..200 {
                if n > 1 || rng.gen_bool(0.5) {
                    let g = if n == 1 { Gate::H(0) } else { random_gate(n, &mut rng) };
                    op.apply_gate(&g).unwrap();
                }
                assert!(op.is_symplectic());
            }
        }
    }

    #[test]
    fn fix_phase_clears_all_n2_cases() {
        for bits in 0..16u32 {
            let mut op = CliffordOp::identity(2);
            for r in 0..4 {
                op.set_phase(r, bits >> r & 1 == 1);
            }
            let fix = op.fix_phase().unwrap();
            assert!(fix.len() <= 2 * 2 * 4);
            assert_eq!(fix.is_empty(), bits == 0);
            for g in &fix {
                op.apply_gate(g).unwrap();
            }
            assert!(op.is_exact_identity(), "phase case {bits:04b}");
        }
    }

    #[test]
    fn fix_phase_requires_identity() {
        let op = CliffordOp::from_gates(2, &[Gate::Cx(0, 1)]).unwrap();
        assert!(matches!(op.fix_phase(), Err(Error::MatrixNotIdentity)));
    }

    #[test]
    fn encoding_quadrants() {
        let op = CliffordOp::from_gates(2, &[Gate::H(1)]).unwrap();
        let obs = op.encode();
        assert_eq!(obs.shape, [2, 2, 4]);
        assert_eq!(obs.at(0, 0, 0), 1.0);
        assert_eq!(obs.at(1, 1, 0), 0.0);
        assert_eq!(obs.at(1, 1, 1), 1.0);
        assert_eq!(obs.at(1, 1, 2), 1.0);
        assert_eq!(obs.at(0, 0, 3), 1.0);
        assert_eq!(CliffordOp::obs_shape(7), [7, 7, 4]);
    }

    #[test]
    fn rejects_swap() {
        let mut op = CliffordOp::identity(2);
        assert!(op.apply_gate(&Gate::Swap(0, 1)).is_err());
    }
}
