use num_complex::Complex64;

use crate::bitmatrix::BitMatrix;
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::operators::{CliffordOp, LinearOp, PermutationOp};

pub const MAX_DENSE_QUBITS: usize = 6;

const TOL: f64 = 1e-9;

/// `2^n x 2^n` unitary. Qubit `q` is bit `q` of a basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnitary {
    n: usize,
    dim: usize,
    /// Column-major: column `c` occupies `data[c*dim..(c+1)*dim]`.
    data: Vec<Complex64>,
}

impl DenseUnitary {
    pub fn identity(n: usize) -> Self {
        let dim = 1 << n;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        DenseUnitary { n, dim, data }
    }

    /// Unitary moving qubit `q` to position `target[q]`.
    pub fn qubit_permutation(target: &[usize]) -> Self {
        let n = target.len();
        let dim = 1 << n;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for x in 0..dim {
            let y = (0..n).filter(|&q| x >> q & 1 == 1).fold(0, |y, q| y | 1 << target[q]);
            data[x * dim + y] = Complex64::new(1.0, 0.0);
        }
        DenseUnitary { n, dim, data }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.dim + row]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.dim..(col + 1) * self.dim]
    }

    /// Left-multiply by `gate`.
    pub fn apply(&mut self, gate: &Gate) {
        let dim = self.dim;
        for col in self.data.chunks_mut(dim) {
            apply_to_state(col, gate);
        }
    }

    /// `self * other`.
    pub fn mul(&self, other: &DenseUnitary) -> DenseUnitary {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for c in 0..dim {
            for k in 0..dim {
                let b = other.data[c * dim + k];
                if b.norm_sqr() == 0.0 {
                    continue;
                }
                for r in 0..dim {
                    data[c * dim + r] += self.data[k * dim + r] * b;
                }
            }
        }
        DenseUnitary { n: self.n, dim, data }
    }

    pub fn adjoint(&self) -> DenseUnitary {
        let dim = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for c in 0..dim {
            for r in 0..dim {
                data[r * dim + c] = self.data[c * dim + r].conj();
            }
        }
        DenseUnitary { n: self.n, dim, data }
    }

    /// Largest entrywise distance.
    pub fn max_diff(&self, other: &DenseUnitary) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &DenseUnitary, tol: f64) -> bool {
        self.dim == other.dim && self.max_diff(other) <= tol
    }

    /// Equality up to a global phase.
    pub fn equal_up_to_phase(&self, other: &DenseUnitary, tol: f64) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let Some((i, a)) = self.data.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())) else {
            return true;
        };
        let b = other.data[i];
        if b.norm() < TOL {
            return false;
        }
        let phase = a / b;
        self.data.iter().zip(&other.data).all(|(x, y)| (x - y * phase).norm() <= tol)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint().mul(self).approx_eq(&DenseUnitary::identity(self.n), tol)
    }

    /// Single-qubit Pauli embedded in the register; `kind` is b'x' or b'z'.
    fn pauli(n: usize, q: usize, kind: u8) -> DenseUnitary {
        let mut u = DenseUnitary::identity(n);
        let dim = u.dim;
        for i in 0..dim {
            let col = &mut u.data[i * dim..(i + 1) * dim];
            col.fill(Complex64::new(0.0, 0.0));
            if kind == b'x' {
                col[i ^ (1 << q)] = Complex64::new(1.0, 0.0);
            } else {
                col[i] = Complex64::new(if i >> q & 1 == 1 { -1.0 } else { 1.0 }, 0.0);
            }
        }
        u
    }
}

fn apply_to_state(v: &mut [Complex64], gate: &Gate) {
    let dim = v.len();
    match *gate {
        Gate::H(q) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let m = 1 << q;
            for i in (0..dim).filter(|i| i & m == 0) {
                let (a, b) = (v[i], v[i | m]);
                v[i] = (a + b) * s;
                v[i | m] = (a - b) * s;
            }
        }
        Gate::S(q) => {
            let m = 1 << q;
            for (i, amp) in v.iter_mut().enumerate() {
                if i & m != 0 {
                    *amp *= Complex64::i();
                }
            }
        }
        Gate::Cx(c, t) => {
            let (mc, mt) = (1 << c, 1 << t);
            for i in (0..dim).filter(|i| i & mc != 0 && i & mt == 0) {
                v.swap(i, i | mt);
            }
        }
        Gate::Swap(a, b) => {
            let (ma, mb) = (1 << a, 1 << b);
            for i in (0..dim).filter(|i| i & ma != 0 && i & mb == 0) {
                v.swap(i, (i & !ma) | mb);
            }
        }
    }
}

/// Product of the circuit's gates, first gate rightmost.
pub fn dense_simulate(circuit: &Circuit) -> Result<DenseUnitary> {
    let n = circuit.n_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::BoundExceeded(format!("dense simulation supports at most {MAX_DENSE_QUBITS} qubits")));
    }
    let mut u = DenseUnitary::identity(n);
    for g in circuit.gates() {
        u.apply(g);
    }
    Ok(u)
}

/// Read the tableau of a Clifford unitary by conjugating each `X_q` and `Z_q`.
pub fn clifford_from_unitary(u: &DenseUnitary) -> Result<CliffordOp> {
    let n = u.n;
    let ud = u.adjoint();
    let mut matrix = BitMatrix::zeros(2 * n, 2 * n);
    let mut phase = vec![false; 2 * n];
    for (row, (q, kind)) in (0..n).map(|q| (q, b'x')).chain((0..n).map(|q| (q, b'z'))).enumerate() {
        let m = u.mul(&DenseUnitary::pauli(n, q, kind)).mul(&ud);
        let (x, z, sign) = read_pauli(&m)?;
        for j in 0..n {
            matrix.set(row, j, x >> j & 1 == 1);
            matrix.set(row, n + j, z >> j & 1 == 1);
        }
        phase[row] = sign;
    }
    CliffordOp::from_parts(matrix, phase)
}

/// Decompose `m = (-1)^sign * P(x, z)` where `P` uses `Y` for overlapping bits.
fn read_pauli(m: &DenseUnitary) -> Result<(usize, usize, bool)> {
    let n = m.n;
    let col0 = m.column(0);
    let x = (0..m.dim)
        .find(|&i| col0[i].norm() > 0.5)
        .ok_or_else(|| Error::NonClifford("conjugated Pauli has an empty column".into()))?;
    let lead = col0[x];
    let mut z = 0;
    for q in 0..n {
        let k = 1 << q;
        let ratio = m.get(k ^ x, k) / lead;
        if (ratio + 1.0).norm() < TOL {
            z |= k;
        } else if (ratio - 1.0).norm() >= TOL {
            return Err(Error::NonClifford("conjugated generator is not a Pauli".into()));
        }
    }
    let n_y = (x & z).count_ones();
    let base = Complex64::i().powu(n_y);
    let s = lead / base;
    let sign = if (s + 1.0).norm() < TOL {
        true
    } else if (s - 1.0).norm() < TOL {
        false
    } else {
        return Err(Error::NonClifford("conjugated generator has a non-real sign".into()));
    };
    let mut expect = DenseUnitary::identity(n);
    for q in (0..n).filter(|q| z >> q & 1 == 1) {
        expect = DenseUnitary::pauli(n, q, b'z').mul(&expect);
    }
    for q in (0..n).filter(|q| x >> q & 1 == 1) {
        expect = DenseUnitary::pauli(n, q, b'x').mul(&expect);
    }
    // expect = X^x Z^z; scale to +-i^{#Y} X^x Z^z
    let scale = if sign { -base } else { base };
    for a in &mut expect.data {
        *a *= scale;
    }
    if !expect.approx_eq(m, 1e-8) {
        return Err(Error::NonClifford("conjugated generator is not a Pauli".into()));
    }
    Ok((x, z, sign))
}

/// Index of the single basis state `U|i>` maps to, if `U` permutes basis states.
fn basis_image(u: &DenseUnitary, i: usize) -> Result<usize> {
    let col = u.column(i);
    let j = (0..u.dim)
        .find(|&j| col[j].norm() > 0.5)
        .ok_or_else(|| Error::Verification("empty column".into()))?;
    let clean = (col[j] - 1.0).norm() < TOL && col.iter().enumerate().all(|(k, a)| k == j || a.norm() < TOL);
    if !clean {
        return Err(Error::Verification("unitary does not permute basis states".into()));
    }
    Ok(j)
}

/// Qubit permutation implemented by `u`, checked on every basis state.
pub fn permutation_from_unitary(u: &DenseUnitary) -> Result<PermutationOp> {
    let n = u.n;
    let mut mapping = vec![0; n];
    for (i, m) in mapping.iter_mut().enumerate() {
        let j = basis_image(u, 1 << i)?;
        if j.count_ones() != 1 {
            return Err(Error::Verification("unitary is not a qubit permutation".into()));
        }
        *m = j.trailing_zeros() as usize;
    }
    let p = PermutationOp::from_mapping(mapping)?;
    for x in 0..u.dim {
        let expect = (0..n).filter(|&i| x >> i & 1 == 1).fold(0, |acc, i| acc | 1 << p.mapping()[i]);
        if basis_image(u, x)? != expect {
            return Err(Error::Verification("unitary is not a qubit permutation".into()));
        }
    }
    Ok(p)
}

/// GF(2) matrix `M` with `U|x> = |Mx>`, checked on every basis state.
pub fn linear_from_unitary(u: &DenseUnitary) -> Result<LinearOp> {
    let n = u.n;
    let mut m = BitMatrix::zeros(n, n);
    for j in 0..n {
        let out = basis_image(u, 1 << j)?;
        for r in 0..n {
            m.set(r, j, out >> r & 1 == 1);
        }
    }
    for x in 0..u.dim {
        let expect = (0..n).filter(|&j| x >> j & 1 == 1).fold(0, |acc, j| {
            acc ^ (0..n).filter(|&r| m.get(r, j)).fold(0, |a, r| a | 1 << r)
        });
        if basis_image(u, x)? != expect {
            return Err(Error::Verification("unitary is not a linear reversible map".into()));
        }
    }
    LinearOp::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Operator;

    #[test]
    fn empty_and_hadamard() {
        let u = dense_simulate(&Circuit::new(2)).unwrap();
        assert!(u.approx_eq(&DenseUnitary::identity(2), 0.0));
        let h = dense_simulate(&Circuit::from_gates(1, vec![Gate::H(0)]).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((h.get(0, 0).re - s).abs() < 1e-15);
        assert!((h.get(0, 1).re - s).abs() < 1e-15);
        assert!((h.get(1, 0).re - s).abs() < 1e-15);
        assert!((h.get(1, 1).re + s).abs() < 1e-15);
    }

    #[test]
    fn cx_bit_order() {
        // control 0, target 1: |01> (index 1) -> |11> (index 3)
        let u = dense_simulate(&Circuit::from_gates(2, vec![Gate::Cx(0, 1)]).unwrap()).unwrap();
        assert_eq!(u.get(3, 1), Complex64::new(1.0, 0.0));
        assert_eq!(u.get(2, 2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn extraction_matches_known_tableaux() {
        for gates in [vec![Gate::H(0)], vec![Gate::S(0)], vec![Gate::S(0), Gate::S(0)], vec![Gate::H(0), Gate::Cx(0, 1)]] {
            let c = Circuit::from_gates(2, gates.clone()).unwrap();
            let dense = clifford_from_unitary(&dense_simulate(&c).unwrap()).unwrap();
            assert_eq!(dense, CliffordOp::from_gates(2, &gates).unwrap(), "{gates:?}");
        }
    }

    #[test]
    fn non_clifford_rejected() {
        let mut u = DenseUnitary::identity(1);
        // T gate
        u.data[3] = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!(matches!(clifford_from_unitary(&u), Err(Error::NonClifford(_))));
    }

    #[test]
    fn swap_and_cx_identities() {
        let swap = dense_simulate(&Circuit::from_gates(2, vec![Gate::Swap(0, 1)]).unwrap()).unwrap();
        let three = dense_simulate(&Circuit::from_gates(2, vec![Gate::Cx(0, 1), Gate::Cx(1, 0), Gate::Cx(0, 1)]).unwrap()).unwrap();
        assert!(swap.approx_eq(&three, 1e-12));
        assert!(swap.is_unitary(1e-12));
    }
}
