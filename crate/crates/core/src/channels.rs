//! CPTP maps in Kraus form.
//!
//! The Kraus list is the only stored representation; [`Superoperator`] is
//! computed on demand. Convex mixtures fold their weights into the Kraus
//! operators (`√w · K`), so every channel applies the same way.

use crate::error::{QrcError, Result};
use crate::qmath::{
    embed_single, pauli_x, pauli_y, pauli_z, qubits_for_dim, ComplexMatrix, DensityOperator, C64,
    ONE, TAU_HERM,
};

/// Tolerance on `‖Σ K†K − I‖_max`.
pub const TAU_CPTP: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct QuantumChannel {
    n_qubits: usize,
    kraus: Vec<ComplexMatrix>,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| QrcError::contract("a channel needs at least one Kraus operator"))?;
        let d = first.rows();
        let n_qubits = qubits_for_dim(d)
            .filter(|_| first.is_square())
            .ok_or_else(|| QrcError::dim(format!("Kraus operators must be 2^n square, got {}x{}", d, first.cols())))?;
        if kraus.iter().any(|k| k.rows() != d || k.cols() != d) {
            return Err(QrcError::dim("Kraus operators differ in dimension"));
        }
        let ch = Self { n_qubits, kraus };
        let err = ch.trace_preservation_error();
        if err > TAU_CPTP {
            return Err(QrcError::contract(format!(
                "Kraus operators are not trace preserving (‖ΣK†K − I‖ = {err:e})"
            )));
        }
        Ok(ch)
    }

    /// Single-Kraus channel from a matrix that is unitary by construction.
    pub(crate) fn from_circuit_unitary(u: ComplexMatrix) -> Self {
        let n_qubits = qubits_for_dim(u.rows()).expect("circuit unitaries are 2^n square");
        Self { n_qubits, kraus: vec![u] }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_qubits: n,
            kraus: vec![ComplexMatrix::identity(1 << n)],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// `‖Σ_j K_j†K_j − I‖_max`.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for k in &self.kraus {
            acc = &acc + &k.adjoint().matmul(k);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(d))
    }

    /// `Σ_j K_j X K_j†` on an arbitrary operator `X` (the linear extension).
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.dim() || x.cols() != self.dim() {
            return Err(QrcError::dim(format!(
                "channel on {} qubits applied to {}x{} operator",
                self.n_qubits,
                x.rows(),
                x.cols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        for k in &self.kraus {
            out = &out + &k.conjugate(x);
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        DensityOperator::checked_cheap(self.apply_operator(rho.matrix())?)
    }
}

/// Single-Kraus channel `ρ ↦ UρU†`.
pub fn unitary_channel(u: &ComplexMatrix) -> Result<QuantumChannel> {
    if !u.is_unitary(1e-9) {
        return Err(QrcError::contract("unitary_channel needs a unitary matrix"));
    }
    QuantumChannel::new(vec![u.clone()])
}

/// Constant map `ρ ↦ Tr(ρ)σ`, with Kraus set `{√λ_m |m⟩⟨b|}` over the
/// eigenpairs `(λ_m, |m⟩)` of σ and the computational basis `|b⟩`.
pub fn reset_channel(sigma: &DensityOperator) -> QuantumChannel {
    let d = sigma.dim();
    let (vals, vecs) = sigma
        .matrix()
        .hermitian_eigen(TAU_HERM)
        .expect("density operators are Hermitian");
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut kraus = Vec::new();
    for (m, &lam) in clipped.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let amp = (lam / total).sqrt();
        let eigvec = vecs.column(m);
        for b in 0..d {
            let mut k = ComplexMatrix::zeros(d, d);
            for (r, &v) in eigvec.iter().enumerate() {
                k[(r, b)] = v * amp;
            }
            kraus.push(k);
        }
    }
    QuantumChannel {
        n_qubits: sigma.n_qubits(),
        kraus,
    }
}

/// Convex combination `Σ_j w_j C_j`.
pub fn mix(channels: &[QuantumChannel], weights: &[f64]) -> Result<QuantumChannel> {
    if channels.is_empty() || channels.len() != weights.len() {
        return Err(QrcError::contract("mix needs one weight per channel"));
    }
    if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
        return Err(QrcError::contract("mixing weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(QrcError::contract(format!("mixing weights sum to {total}, not 1")));
    }
    let n = channels[0].n_qubits;
    if channels.iter().any(|c| c.n_qubits != n) {
        return Err(QrcError::dim("mixed channels act on different qubit counts"));
    }
    let kraus: Vec<ComplexMatrix> = channels
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .flat_map(|(c, &w)| c.kraus.iter().map(move |k| k.scale_real(w.sqrt())))
        .collect();
    Ok(QuantumChannel { n_qubits: n, kraus })
}

/// `outer ∘ inner`, i.e. `ρ ↦ outer(inner(ρ))`.
pub fn compose(outer: &QuantumChannel, inner: &QuantumChannel) -> Result<QuantumChannel> {
    if outer.n_qubits != inner.n_qubits {
        return Err(QrcError::dim("composed channels act on different qubit counts"));
    }
    let kraus = outer
        .kraus
        .iter()
        .flat_map(|a| inner.kraus.iter().map(move |b| a.matmul(b)))
        .collect();
    Ok(QuantumChannel {
        n_qubits: outer.n_qubits,
        kraus,
    })
}

pub fn apply(c: &QuantumChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    c.apply(rho)
}

/// `C_a ⊗ C_b` acting on the concatenated register (a leftmost).
pub fn tensor(a: &QuantumChannel, b: &QuantumChannel) -> QuantumChannel {
    let kraus = a
        .kraus
        .iter()
        .flat_map(|ka| b.kraus.iter().map(move |kb| ka.kron(kb)))
        .collect();
    QuantumChannel {
        n_qubits: a.n_qubits + b.n_qubits,
        kraus,
    }
}

/// A single-qubit channel acting on qubit `i` of an `n`-qubit register.
pub fn on_qubit(c: &QuantumChannel, i: usize, n: usize) -> Result<QuantumChannel> {
    if c.n_qubits != 1 {
        return Err(QrcError::dim("on_qubit expects a single-qubit channel"));
    }
    if i >= n {
        return Err(QrcError::IndexOutOfRange { index: i, len: n });
    }
    Ok(QuantumChannel {
        n_qubits: n,
        kraus: c.kraus.iter().map(|k| embed_single(k, i, n)).collect(),
    })
}

/// The same single-qubit channel on every qubit of an `n`-qubit register.
pub fn on_each_qubit(c: &QuantumChannel, n: usize) -> Result<QuantumChannel> {
    if c.n_qubits != 1 {
        return Err(QrcError::dim("on_each_qubit expects a single-qubit channel"));
    }
    Ok((1..n).fold(c.clone(), |acc, _| tensor(&acc, c)))
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QrcError::InputDomain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Amplitude damping with decay probability γ.
pub fn amplitude_damping(gamma: f64) -> Result<QuantumChannel> {
    check_probability("gamma", gamma)?;
    let k0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - gamma).sqrt()]]);
    let k1 = ComplexMatrix::from_real_rows(&[&[0.0, gamma.sqrt()], &[0.0, 0.0]]);
    QuantumChannel::new(vec![k0, k1])
}

/// Phase damping with parameter λ: Kraus `diag(1, √(1−λ))`, `diag(0, √λ)`.
pub fn phase_damping(lambda: f64) -> Result<QuantumChannel> {
    check_probability("lambda", lambda)?;
    let k0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - lambda).sqrt()]]);
    let k1 = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, lambda.sqrt()]]);
    QuantumChannel::new(vec![k0, k1])
}

/// Dephasing `ρ ↦ (1 − p/2)ρ + (p/2) ZρZ`; `p = 1` removes all coherence.
pub fn dephasing(p: f64) -> Result<QuantumChannel> {
    check_probability("p", p)?;
    QuantumChannel::new(vec![
        ComplexMatrix::identity(2).scale_real((1.0 - p / 2.0).sqrt()),
        pauli_z().scale_real((p / 2.0).sqrt()),
    ])
}

/// Single-qubit depolarizing `ρ ↦ (1−p)ρ + p I/2` in Pauli Kraus form.
pub fn depolarizing(p: f64) -> Result<QuantumChannel> {
    check_probability("p", p)?;
    QuantumChannel::new(vec![
        ComplexMatrix::identity(2).scale_real((1.0 - 3.0 * p / 4.0).sqrt()),
        pauli_x().scale_real((p / 4.0).sqrt()),
        pauli_y().scale_real((p / 4.0).sqrt()),
        pauli_z().scale_real((p / 4.0).sqrt()),
    ])
}

/// Complete dephasing in the computational basis of `n` qubits: Kraus
/// operators are the projectors `|b⟩⟨b|`. Equivalent to coupling every
/// qubit to a fresh ancilla by CNOT and tracing the ancillas out.
pub fn computational_dephasing(n: usize) -> QuantumChannel {
    let d = 1usize << n;
    let kraus = (0..d)
        .map(|b| {
            let mut p = ComplexMatrix::zeros(d, d);
            p[(b, b)] = ONE;
            p
        })
        .collect();
    QuantumChannel { n_qubits: n, kraus }
}

/// An ordered operator basis, orthogonal under the Hilbert–Schmidt product.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    labels: Vec<String>,
    elements: Vec<ComplexMatrix>,
}

impl OperatorBasis {
    pub fn new(labels: Vec<String>, elements: Vec<ComplexMatrix>) -> Result<Self> {
        if labels.len() != elements.len() || elements.is_empty() {
            return Err(QrcError::contract("basis needs one label per element"));
        }
        let d = elements[0].rows();
        if elements.len() != d * d || elements.iter().any(|e| e.rows() != d || e.cols() != d) {
            return Err(QrcError::dim("an operator basis on C^d needs d² elements of size d×d"));
        }
        for (a, ea) in elements.iter().enumerate() {
            for eb in elements.iter().skip(a + 1) {
                if ea.adjoint().matmul(eb).trace().norm() > 1e-12 {
                    return Err(QrcError::contract("operator basis is not orthogonal"));
                }
            }
        }
        Ok(Self { labels, elements })
    }

    /// Pauli strings over `{I, Z, X, Y}` in that order, qubit 0 leftmost.
    pub fn pauli(n: usize) -> Self {
        let single = [
            ("I", ComplexMatrix::identity(2)),
            ("Z", pauli_z()),
            ("X", pauli_x()),
            ("Y", pauli_y()),
        ];
        let mut labels = vec![String::new()];
        let mut elements = vec![ComplexMatrix::identity(1)];
        for _ in 0..n {
            let mut next_l = Vec::with_capacity(labels.len() * 4);
            let mut next_e = Vec::with_capacity(elements.len() * 4);
            for (l, e) in labels.iter().zip(&elements) {
                for (sl, se) in &single {
                    next_l.push(format!("{l}{sl}"));
                    next_e.push(e.kron(se));
                }
            }
            labels = next_l;
            elements = next_e;
        }
        Self { labels, elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// Coefficients `v_a = Tr(B_a† X) / Tr(B_a† B_a)`, so `X = Σ v_a B_a`.
    pub fn coefficients(&self, x: &ComplexMatrix) -> Vec<C64> {
        self.elements
            .iter()
            .map(|b| {
                let bd = b.adjoint();
                bd.matmul(x).trace() / bd.matmul(b).trace()
            })
            .collect()
    }

    pub fn reconstruct(&self, coeffs: &[C64]) -> ComplexMatrix {
        let d = self.elements[0].rows();
        let mut out = ComplexMatrix::zeros(d, d);
        for (b, &c) in self.elements.iter().zip(coeffs) {
            out = &out + &b.scale(c);
        }
        out
    }
}

/// Matrix of a channel in an operator basis:
/// `S[a, b] = Tr(B_a† C(B_b)) / Tr(B_a† B_a)`.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub basis: OperatorBasis,
    pub matrix: ComplexMatrix,
}

impl Superoperator {
    /// `S · v` on a coefficient vector.
    pub fn act(&self, coeffs: &[C64]) -> Vec<C64> {
        self.matrix.matvec(coeffs)
    }

    /// Applies the cached matrix to an operator via its basis coefficients.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.basis.reconstruct(&self.act(&self.basis.coefficients(x)))
    }
}

pub fn superoperator_matrix(c: &QuantumChannel, basis: &OperatorBasis) -> Result<Superoperator> {
    if basis.elements[0].rows() != c.dim() {
        return Err(QrcError::dim("basis dimension does not match channel"));
    }
    let images: Vec<ComplexMatrix> = basis
        .elements
        .iter()
        .map(|b| c.apply_operator(b))
        .collect::<Result<_>>()?;
    let m = basis.len();
    let mut matrix = ComplexMatrix::zeros(m, m);
    for (a, ba) in basis.elements.iter().enumerate() {
        let bad = ba.adjoint();
        let norm = bad.matmul(ba).trace();
        for (b, img) in images.iter().enumerate() {
            matrix[(a, b)] = bad.matmul(img).trace() / norm;
        }
    }
    Ok(Superoperator {
        basis: basis.clone(),
        matrix,
    })
}
