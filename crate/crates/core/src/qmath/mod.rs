//! Dense complex linear algebra and density-operator primitives.
//!
//! Qubit ordering: qubit 0 is the leftmost tensor factor, so
//! `Z^(i) = I^⊗i ⊗ Z ⊗ I^⊗(n-1-i)` and qubit `i` is bit `n-1-i` of a
//! computational-basis index.

mod matrix;

pub use matrix::{ComplexMatrix, C64, I, ONE, ZERO};

use crate::error::{QrcError, Result};

/// Hermiticity tolerance.
pub const TAU_HERM: f64 = 1e-9;
/// Unit-trace tolerance.
pub const TAU_TR: f64 = 1e-9;
/// Smallest admissible eigenvalue is `-TAU_PSD`.
pub const TAU_PSD: f64 = 1e-9;

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

/// Kronecker product of two matrices.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Kronecker product of a nonempty list, leftmost factor first.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    let mut it = factors.into_iter();
    let first = it.next().expect("kron_all needs at least one factor").clone();
    it.fold(first, |acc, m| acc.kron(m))
}

/// Embeds a single-qubit operator on qubit `i` of an `n`-qubit register.
pub fn embed_single(op: &ComplexMatrix, i: usize, n: usize) -> ComplexMatrix {
    let left = ComplexMatrix::identity(1 << i);
    let right = ComplexMatrix::identity(1 << (n - 1 - i));
    left.kron(op).kron(&right)
}

/// Value of qubit `i` (0 or 1) in basis index `b` of an `n`-qubit register.
#[inline]
pub fn qubit_bit(b: usize, i: usize, n: usize) -> usize {
    (b >> (n - 1 - i)) & 1
}

/// Z eigenvalue (+1 for |0⟩, -1 for |1⟩) of qubit `i` in basis index `b`.
#[inline]
pub fn z_sign(b: usize, i: usize, n: usize) -> f64 {
    if qubit_bit(b, i, n) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Position of a tensor factor, validated against a register width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitIndex(usize);

impl QubitIndex {
    pub fn new(index: usize, n_qubits: usize) -> Result<Self> {
        if index >= n_qubits {
            return Err(QrcError::IndexOutOfRange {
                index,
                len: n_qubits,
            });
        }
        Ok(Self(index))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Number of qubits `n` for a `2^n` dimension, if it is a power of two.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    dim.is_power_of_two().then(|| dim.trailing_zeros() as usize)
}

/// A `2^n × 2^n` Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates all three invariants, including the eigenvalue check.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = Self::checked_cheap(matrix)?;
        let min = rho.matrix.hermitian_eigenvalues(TAU_HERM)?[0];
        if min < -TAU_PSD {
            return Err(QrcError::contract(format!(
                "density operator has negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Checks shape, Hermiticity and trace only. Used for outputs of CPTP maps,
    /// whose positivity follows from the Kraus form.
    pub(crate) fn checked_cheap(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QrcError::dim("density operator must be square"));
        }
        let n_qubits = qubits_for_dim(matrix.rows())
            .ok_or_else(|| QrcError::dim(format!("dimension {} is not 2^n", matrix.rows())))?;
        if !matrix.is_hermitian(TAU_HERM) {
            return Err(QrcError::contract("density operator must be Hermitian"));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TAU_TR || tr.im.abs() > TAU_TR {
            return Err(QrcError::contract(format!("density operator trace {tr} != 1")));
        }
        Ok(Self { n_qubits, matrix })
    }

    /// |ψ⟩⟨ψ| for a normalized state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > TAU_TR {
            return Err(QrcError::contract(format!("state vector norm² {norm} != 1")));
        }
        Self::checked_cheap(ComplexMatrix::outer(psi, psi))
    }

    /// Computational basis state |b⟩⟨b| on `n` qubits.
    pub fn basis(n: usize, b: usize) -> Self {
        let d = 1usize << n;
        assert!(b < d);
        let mut m = ComplexMatrix::zeros(d, d);
        m[(b, b)] = ONE;
        Self {
            n_qubits: n,
            matrix: m,
        }
    }

    /// (|0⟩⟨0|)^⊗n.
    pub fn zeros(n: usize) -> Self {
        Self::basis(n, 0)
    }

    /// I / 2^n.
    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        Self {
            n_qubits: n,
            matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            matrix: self.matrix.kron(&other.matrix),
        }
    }

    /// Minimum eigenvalue, for invariant audits.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .hermitian_eigenvalues(TAU_HERM)
            .map(|v| v[0])
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Maximum deviation from the three invariants: trace error,
    /// anti-Hermitian part and negative eigenvalue magnitude.
    pub fn invariant_violation(&self) -> f64 {
        let tr = self.matrix.trace();
        let tr_err = (tr - ONE).norm();
        let herm_err = self.matrix.max_abs_diff(&self.matrix.adjoint());
        let psd_err = (-self.min_eigenvalue()).max(0.0);
        tr_err.max(herm_err).max(psd_err)
    }
}

/// Reduced state on the `keep` factors of a system with subsystem `dims`.
///
/// The kept factors stay in their original order.
pub fn partial_trace(rho: &DensityOperator, dims: &[usize], keep: &[usize]) -> Result<DensityOperator> {
    let m = partial_trace_matrix(rho.matrix(), dims, keep)?;
    DensityOperator::checked_cheap(m)
}

/// Partial trace on a bare square matrix (no density-operator checks).
pub fn partial_trace_matrix(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || total != m.rows() {
        return Err(QrcError::dim(format!(
            "subsystem dims {dims:?} (product {total}) do not match matrix dimension {}",
            m.rows()
        )));
    }
    if let Some(&k) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(QrcError::dim(format!("kept factor {k} out of {} factors", dims.len())));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let kept_dim: usize = keep_sorted.iter().map(|&k| dims[k]).product();

    // split every full index into (kept index, traced index)
    let mut strides = vec![1usize; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !keep_sorted.contains(f)).collect();
    let split = |full: usize| -> (usize, usize) {
        let mut k_idx = 0;
        for &f in &keep_sorted {
            k_idx = k_idx * dims[f] + (full / strides[f]) % dims[f];
        }
        let mut t_idx = 0;
        for &f in &traced {
            t_idx = t_idx * dims[f] + (full / strides[f]) % dims[f];
        }
        (k_idx, t_idx)
    };
    let traced_dim = total / kept_dim;
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kept_dim); traced_dim];
    for full in 0..total {
        let (k, t) = split(full);
        groups[t].push((full, k));
    }
    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for group in &groups {
        for &(f1, k1) in group {
            for &(f2, k2) in group {
                out[(k1, k2)] += m[(f1, f2)];
            }
        }
    }
    Ok(out)
}

/// Schatten-1 norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    if !h.is_hermitian(TAU_HERM) {
        return Err(QrcError::contract("trace_norm expects a Hermitian matrix"));
    }
    Ok(h.hermitian_eigenvalues(TAU_HERM)?.iter().map(|v| v.abs()).sum())
}

/// Trace distance `‖ρ − σ‖₁` (without the conventional factor ½).
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QrcError::dim("trace distance between different dimensions"));
    }
    trace_norm(&(rho.matrix() - sigma.matrix()))
}

/// ⟨Z^(i)⟩ = Tr(ρ Z^(i)).
pub fn expect_z(rho: &DensityOperator, i: usize) -> Result<f64> {
    let n = rho.n_qubits();
    let q = QubitIndex::new(i, n)?;
    Ok(expect_z_unchecked(rho.matrix(), q.get(), n))
}

/// All ⟨Z^(i)⟩ for i = 0..n in one pass over the diagonal.
pub fn expect_z_all(rho: &DensityOperator) -> Vec<f64> {
    let n = rho.n_qubits();
    let m = rho.matrix();
    let mut out = vec![0.0; n];
    for b in 0..rho.dim() {
        let p = m[(b, b)].re;
        for (i, o) in out.iter_mut().enumerate() {
            *o += z_sign(b, i, n) * p;
        }
    }
    out
}

fn expect_z_unchecked(m: &ComplexMatrix, i: usize, n: usize) -> f64 {
    (0..m.rows()).map(|b| z_sign(b, i, n) * m[(b, b)].re).sum()
}

/// Pauli coefficients `(c_I, c_Z, c_X, c_Y)` of a single-qubit operator,
/// with `ρ = ½(c_I I + c_Z Z + c_X X + c_Y Y)`.
pub fn bloch_coefficients(m: &ComplexMatrix) -> [f64; 4] {
    assert_eq!((m.rows(), m.cols()), (2, 2));
    let coef = |p: &ComplexMatrix| p.matmul(m).trace().re;
    [
        coef(&ComplexMatrix::identity(2)),
        coef(&pauli_z()),
        coef(&pauli_x()),
        coef(&pauli_y()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, seeded};

    fn bell() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::pure(&[C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let zi = kron(&pauli_z(), &i2);
        let expect = ComplexMatrix::diag(&[ONE, ONE, -ONE, -ONE]);
        assert_eq!(zi, expect);
    }

    #[test]
    fn kron_matches_element_formula() {
        let a = pauli_x();
        let b = pauli_z();
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for r in 0..2 {
                    for c in 0..2 {
                        assert_eq!(k[(i * 2 + r, j * 2 + c)], a[(i, j)] * b[(r, c)]);
                    }
                }
            }
        }
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let r = partial_trace(&bell(), &[2, 2], &[0]).unwrap();
        assert!(r.matrix().max_abs_diff(DensityOperator::maximally_mixed(1).matrix()) < 1e-15);
    }

    #[test]
    fn product_state_marginals() {
        let mut rng = seeded(3);
        let rho = random_density(1, &mut rng);
        let sigma = random_density(2, &mut rng);
        let joint = rho.kron(&sigma);
        let a = partial_trace(&joint, &[2, 4], &[0]).unwrap();
        let b = partial_trace(&joint, &[2, 4], &[1]).unwrap();
        assert!(a.matrix().max_abs_diff(rho.matrix()) < 1e-14);
        assert!(b.matrix().max_abs_diff(sigma.matrix()) < 1e-14);
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let mut rng = seeded(11);
        let rho = random_density(2, &mut rng);
        let m = rho.matrix();
        // Tr_1: (ρ_A)[i,j] = Σ_k ρ[i·2+k, j·2+k]
        let mut oracle = ComplexMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    oracle[(i, j)] += m[(i * 2 + k, j * 2 + k)];
                }
            }
        }
        let got = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(got.matrix().max_abs_diff(&oracle) < 1e-15);
        // Tr_0: (ρ_B)[i,j] = Σ_k ρ[k·2+i, k·2+j]
        let mut oracle_b = ComplexMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    oracle_b[(i, j)] += m[(k * 2 + i, k * 2 + j)];
                }
            }
        }
        let got_b = partial_trace(&rho, &[2, 2], &[1]).unwrap();
        assert!(got_b.matrix().max_abs_diff(&oracle_b) < 1e-15);
    }

    #[test]
    fn partial_trace_composes() {
        let mut rng = seeded(5);
        let rho = random_density(3, &mut rng);
        let once = partial_trace(&rho, &[2, 2, 2], &[1]).unwrap();
        let step = partial_trace(&rho, &[2, 2, 2], &[0, 1]).unwrap();
        let twice = partial_trace(&step, &[2, 2], &[1]).unwrap();
        assert!(once.matrix().max_abs_diff(twice.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_dimension_error() {
        assert!(matches!(
            partial_trace(&bell(), &[2, 4], &[0]),
            Err(QrcError::Dimension(_))
        ));
    }

    #[test]
    fn trace_norm_examples() {
        let d = &DensityOperator::basis(1, 0).into_matrix() - &DensityOperator::basis(1, 1).into_matrix();
        assert!((trace_norm(&d).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(trace_norm(&ComplexMatrix::zeros(4, 4)).unwrap(), 0.0);
        let nh = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(trace_norm(&nh), Err(QrcError::Contract(_))));
    }

    #[test]
    fn trace_norm_matches_bloch_distance() {
        let mut rng = seeded(17);
        for _ in 0..20 {
            let a = random_density(1, &mut rng);
            let b = random_density(1, &mut rng);
            let ca = bloch_coefficients(a.matrix());
            let cb = bloch_coefficients(b.matrix());
            let dist = ((ca[1] - cb[1]).powi(2) + (ca[2] - cb[2]).powi(2) + (ca[3] - cb[3]).powi(2)).sqrt();
            assert!((trace_distance(&a, &b).unwrap() - dist).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_norm_is_a_norm() {
        let mut rng = seeded(23);
        for _ in 0..20 {
            let a = random_hermitian(4, &mut rng);
            let b = random_hermitian(4, &mut rng);
            let na = trace_norm(&a).unwrap();
            let nb = trace_norm(&b).unwrap();
            assert!(trace_norm(&(&a + &b)).unwrap() <= na + nb + 1e-10);
            let s = -2.5;
            assert!((trace_norm(&a.scale_real(s)).unwrap() - s.abs() * na).abs() < 1e-10);
        }
    }

    #[test]
    fn expect_z_examples() {
        for n in 1..4 {
            let zero = DensityOperator::zeros(n);
            let mixed = DensityOperator::maximally_mixed(n);
            for i in 0..n {
                assert_eq!(expect_z(&zero, i).unwrap(), 1.0);
                assert!(expect_z(&mixed, i).unwrap().abs() < 1e-15);
            }
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityOperator::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        let state = plus.kron(&DensityOperator::basis(1, 1));
        assert!((expect_z(&state, 1).unwrap() + 1.0).abs() < 1e-15);
        assert!(expect_z(&state, 0).unwrap().abs() < 1e-15);
        assert!(matches!(
            expect_z(&state, 2),
            Err(QrcError::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn expect_z_matches_embedded_operator() {
        let mut rng = seeded(29);
        let rho = random_density(3, &mut rng);
        let all = expect_z_all(&rho);
        for i in 0..3 {
            let z = embed_single(&pauli_z(), i, 3);
            let direct = z.matmul(rho.matrix()).trace();
            assert!((direct.re - all[i]).abs() < 1e-13 && direct.im.abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_invalid_density() {
        let not_psd = ComplexMatrix::from_real_rows(&[&[1.5, 0.0], &[0.0, -0.5]]);
        assert!(DensityOperator::new(not_psd).is_err());
        let bad_trace = ComplexMatrix::identity(2);
        assert!(DensityOperator::new(bad_trace).is_err());
    }
}
