//! Single-qubit reservoir that separates input histories.
//!
//! A system qubit interacts with an ancilla prepared in `|0⟩` (probability
//! `u`) or `|1⟩` (probability `1 − u`) under
//! `H = J(X⊗X + Y⊗Y) + α(Z⊗I + I⊗Z)` for unit time, the ancilla is traced
//! out, and the result is mixed with `I/2` at weight `ε`. Qubit states are
//! vectors `r = (r_I, r_Z, r_X, r_Y)` with `ρ = r_I I + r_Z Z + r_X X + r_Y Y`.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::channels::{mix, reset_channel, QuantumChannel};
use crate::error::{QrcError, Result};
use crate::qmath::{kron, pauli_x, pauli_y, pauli_z, ComplexMatrix, DensityOperator, C64, ONE, TAU_HERM, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationModel {
    pub j: f64,
    pub alpha: f64,
    pub eps: f64,
    pub w1: f64,
    pub w_c: f64,
}

impl SeparationModel {
    pub fn new(j: f64, alpha: f64, eps: f64, w1: f64, w_c: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(QrcError::InputDomain(format!("ε = {eps} outside (0, 1)")));
        }
        Ok(Self { j, alpha, eps, w1, w_c })
    }

    /// `θ = (1 − ε)cos²(2J)`, the memory decay per step.
    pub fn theta(&self) -> f64 {
        (1.0 - self.eps) * (2.0 * self.j).cos().powi(2)
    }

    fn drive(&self) -> f64 {
        (1.0 - self.eps) * (2.0 * self.j).sin().powi(2)
    }
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(QrcError::InputDomain(format!("input {u} outside [0, 1]")))
    }
}

/// Closed-form transfer matrix on `(r_I, r_Z, r_X, r_Y)`.
pub fn transfer_matrix(m: &SeparationModel, u: f64) -> Result<Matrix4<f64>> {
    check_u(u)?;
    let k = 1.0 - m.eps;
    let (c2j, s2j) = ((2.0 * m.j).cos(), (2.0 * m.j).sin());
    let (c2a, s2a) = ((2.0 * m.alpha).cos(), (2.0 * m.alpha).sin());
    #[rustfmt::skip]
    let t = Matrix4::new(
        1.0,                        0.0,           0.0,             0.0,
        k * s2j * s2j * (2.0 * u - 1.0), k * c2j * c2j, 0.0,             0.0,
        0.0,                        0.0,           k * c2j * c2a,   -k * c2j * s2a,
        0.0,                        0.0,           k * c2j * s2a,   k * c2j * c2a,
    );
    Ok(t)
}

pub fn hamiltonian(m: &SeparationModel) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2);
    let mut h = (&kron(&pauli_x(), &pauli_x()) + &kron(&pauli_y(), &pauli_y())).scale_real(m.j);
    h.add_scaled(&(&kron(&pauli_z(), &id) + &kron(&id, &pauli_z())), m.alpha);
    h
}

/// `e^{−iH}` through the eigendecomposition of `H`.
pub fn evolution(m: &SeparationModel) -> Result<ComplexMatrix> {
    let (vals, vecs) = hamiltonian(m).hermitian_eigen(TAU_HERM)?;
    let phases: Vec<C64> = vals.iter().map(|&e| C64::from_polar(1.0, -e)).collect();
    Ok(vecs.matmul(&ComplexMatrix::diag(&phases)).matmul(&vecs.adjoint()))
}

/// Kraus operators `(⟨b|⊗I) U (|a⟩⊗I)` of the ancilla-in-`|a⟩` branch.
fn branch(u: &ComplexMatrix, a: usize) -> Result<QuantumChannel> {
    let kraus = (0..2)
        .map(|b| ComplexMatrix::from_fn(2, 2, |r, c| u[(2 * b + r, 2 * a + c)]))
        .collect();
    QuantumChannel::new(kraus)
}

/// The reservoir map at input `u`, built from the Hamiltonian coupling.
pub fn explicit_channel(m: &SeparationModel, u: f64) -> Result<QuantumChannel> {
    check_u(u)?;
    let evo = evolution(m)?;
    let k = 1.0 - m.eps;
    mix(
        &[branch(&evo, 0)?, branch(&evo, 1)?, reset_channel(&DensityOperator::maximally_mixed(1))],
        &[k * u, k * (1.0 - u), m.eps],
    )
}

/// `r` of a qubit operator.
pub fn pauli_vector(x: &ComplexMatrix) -> Vector4<f64> {
    let t = |p: &ComplexMatrix| p.matmul(x).trace().re / 2.0;
    Vector4::new(x.trace().re / 2.0, t(&pauli_z()), t(&pauli_x()), t(&pauli_y()))
}

pub fn from_pauli_vector(r: &Vector4<f64>) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(2).scale_real(r[0]);
    m.add_scaled(&pauli_z(), r[1]);
    m.add_scaled(&pauli_x(), r[2]);
    m.add_scaled(&pauli_y(), r[3]);
    m
}

/// `ρ̄_{−∞} = ½(1, 1, 0, 0)`, i.e. `|0⟩⟨0|`.
pub fn initial_vector() -> Vector4<f64> {
    Vector4::new(0.5, 0.5, 0.0, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesOutput {
    pub value: f64,
    /// Bound on the omitted tail `j ≥ T` of the series.
    pub truncation_bound: f64,
}

/// `w₁(1−ε)sin²(2J) Σ_{j<T} θ^j (2u_{−j} − 1) + w_c`, where `window[j]` is
/// `u_{−j}`.
pub fn output_geometric(m: &SeparationModel, window: &[f64], t: usize) -> Result<SeriesOutput> {
    if window.len() < t {
        return Err(QrcError::dim(format!("window of {} for {t} terms", window.len())));
    }
    window[..t].iter().try_for_each(|&u| check_u(u))?;
    let theta = m.theta();
    if theta >= 1.0 {
        return Err(QrcError::contract(format!("θ = {theta} is not below 1")));
    }
    let mut pow = 1.0;
    let mut sum = 0.0;
    for &u in &window[..t] {
        sum += pow * (2.0 * u - 1.0);
        pow *= theta;
    }
    Ok(SeriesOutput {
        value: m.w1 * m.drive() * sum + m.w_c,
        truncation_bound: m.w1.abs() * m.drive() * theta.powi(t as i32) / (1.0 - theta),
    })
}

/// `2w₁ [T̄(u_0) ⋯ T̄(u_{−T+1}) ρ̄_{−∞}]_Z + w_c`.
pub fn output_iterated(m: &SeparationModel, window: &[f64], t: usize) -> Result<f64> {
    if window.len() < t {
        return Err(QrcError::dim(format!("window of {} for {t} steps", window.len())));
    }
    let mut r = initial_vector();
    for &u in window[..t].iter().rev() {
        r = transfer_matrix(m, u)? * r;
    }
    Ok(2.0 * m.w1 * r[1] + m.w_c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesComparison {
    pub iterated: f64,
    pub series: f64,
    pub difference: f64,
    /// Series tail bound plus `|w₁|θ^T`, the weight the iteration keeps on
    /// its initial vector.
    pub bound: f64,
}

pub fn iteration_vs_series(m: &SeparationModel, window: &[f64], t: usize) -> Result<SeriesComparison> {
    let iterated = output_iterated(m, window, t)?;
    let s = output_geometric(m, window, t)?;
    Ok(SeriesComparison {
        iterated,
        series: s.value,
        difference: (iterated - s.value).abs(),
        bound: s.truncation_bound + m.w1.abs() * m.theta().powi(t as i32),
    })
}

/// Output difference of two input windows (index 0 is the present).
pub fn separation_witness(u: &[f64], v: &[f64], m: &SeparationModel) -> Result<f64> {
    if u.len() != v.len() {
        return Err(QrcError::dim("windows of different length"));
    }
    Ok(output_geometric(m, u, u.len())?.value - output_geometric(m, v, v.len())?.value)
}

/// `⟨Z⟩` after each input from `ρ_0`, via the explicit channel.
pub fn explicit_z_trajectory(m: &SeparationModel, inputs: &[f64], rho0: &DensityOperator) -> Result<Vec<f64>> {
    let mut rho = rho0.clone();
    inputs
        .iter()
        .map(|&u| {
            rho = explicit_channel(m, u)?.apply(&rho)?;
            Ok(pauli_vector(rho.matrix())[1] * 2.0)
        })
        .collect()
}

pub fn transfer_z_trajectory(m: &SeparationModel, inputs: &[f64], rho0: &DensityOperator) -> Result<Vec<f64>> {
    let mut r = pauli_vector(rho0.matrix());
    inputs
        .iter()
        .map(|&u| {
            r = transfer_matrix(m, u)? * r;
            Ok(2.0 * r[1])
        })
        .collect()
}

/// Basis states of the ancilla as density matrices, for reference.
pub fn ancilla_state(a: usize) -> DensityOperator {
    let psi = if a == 0 { [ONE, ZERO] } else { [ZERO, ONE] };
    DensityOperator::pure(&psi).expect("normalized")
}
