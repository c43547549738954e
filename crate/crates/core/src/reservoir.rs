//! Input-driven dissipative dynamics, polynomial readout and multiplexing.
//!
//! Each subsystem evolves as
//! `ρ ↦ (1−ε)(u·T0(ρ) + (1−u)·T1(ρ)) + ε·σ`, and the joint state is the
//! tensor product of the subsystem states. Only the factors are stored.

use serde::{Deserialize, Serialize};

use crate::channels::{compose, mix, on_qubit, reset_channel, QuantumChannel};
use crate::circuits::{circuit_unitary, Circuit};
use crate::error::{QrcError, Result};
use crate::qmath::{expect_z_all, ComplexMatrix, DensityOperator};
use crate::sampling::Scheme;

pub(crate) fn check_input(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(QrcError::InputDomain(format!("input {u} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(QrcError::InputDomain(format!("eps = {eps} outside (0, 1]")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Subsystem {
    t0: QuantumChannel,
    t1: QuantumChannel,
    eps: f64,
    sigma: DensityOperator,
    circuits: Option<(Circuit, Circuit)>,
    /// Single-qubit channels embedded at full width, applied after the branch.
    noise: Vec<QuantumChannel>,
}

impl Subsystem {
    pub fn new(t0: QuantumChannel, t1: QuantumChannel, eps: f64, sigma: DensityOperator) -> Result<Self> {
        check_eps(eps)?;
        if t0.n_qubits() != t1.n_qubits() || t0.n_qubits() != sigma.n_qubits() {
            return Err(QrcError::dim("T0, T1 and sigma must act on the same qubits"));
        }
        Ok(Self {
            t0,
            t1,
            eps,
            sigma,
            circuits: None,
            noise: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.t0.n_qubits()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn t0(&self) -> &QuantumChannel {
        &self.t0
    }

    pub fn t1(&self) -> &QuantumChannel {
        &self.t1
    }

    pub fn sigma(&self) -> &DensityOperator {
        &self.sigma
    }

    /// The `(U0, U1)` circuits when the branches are noiseless unitary circuits.
    pub fn circuits(&self) -> Option<&(Circuit, Circuit)> {
        self.circuits.as_ref().filter(|_| self.noise.is_empty())
    }

    pub fn is_noisy(&self) -> bool {
        !self.noise.is_empty()
    }

    fn apply_noise(&self, mut x: ComplexMatrix) -> Result<ComplexMatrix> {
        for c in &self.noise {
            x = c.apply_operator(&x)?;
        }
        Ok(x)
    }

    /// Linear extension of `T(u)` to arbitrary operators:
    /// `X ↦ (1−ε)(u·T0(X) + (1−u)·T1(X)) + ε·Tr(X)·σ`.
    pub fn map_operator(&self, x: &ComplexMatrix, u: f64) -> Result<ComplexMatrix> {
        check_input(u)?;
        let d = 1usize << self.n_qubits();
        let mut out = ComplexMatrix::zeros(d, d);
        let keep = 1.0 - self.eps;
        let (a, b) = match &self.circuits {
            Some((c0, c1)) if x.rows() == d && x.cols() == d => (c0.conjugate(x), c1.conjugate(x)),
            _ if keep > 0.0 => (self.t0.apply_operator(x)?, self.t1.apply_operator(x)?),
            _ => (out.clone(), out.clone()),
        };
        if keep > 0.0 && u > 0.0 {
            out.add_scaled(&a, keep * u);
        }
        if keep > 0.0 && u < 1.0 {
            out.add_scaled(&b, keep * (1.0 - u));
        }
        let out = self.apply_noise(out)?;
        Ok(&out + &self.sigma.matrix().scale(x.trace() * self.eps))
    }

    pub fn step(&self, rho: &DensityOperator, u: f64) -> Result<DensityOperator> {
        if rho.n_qubits() != self.n_qubits() {
            return Err(QrcError::dim("state width does not match subsystem"));
        }
        DensityOperator::checked_cheap(self.map_operator(rho.matrix(), u)?)
    }

    /// `T(u)` as a single Kraus-form channel. The Kraus count grows as
    /// `k^n` for per-qubit noise with `k` operators.
    pub fn channel(&self, u: f64) -> Result<QuantumChannel> {
        check_input(u)?;
        let keep = 1.0 - self.eps;
        let (mut t0, mut t1) = (self.t0.clone(), self.t1.clone());
        for c in &self.noise {
            t0 = compose(c, &t0)?;
            t1 = compose(c, &t1)?;
        }
        mix(&[t0, t1, reset_channel(&self.sigma)], &[keep * u, keep * (1.0 - u), self.eps])
    }

    /// `‖T(1)(|0…0⟩⟨0…0|) − |0…0⟩⟨0…0|‖_max`; zero when the all-zeros
    /// state is stationary under constant input 1.
    pub fn steady_state_deviation(&self) -> Result<f64> {
        let zero = DensityOperator::zeros(self.n_qubits());
        Ok(self.step(&zero, 1.0)?.matrix().max_abs_diff(zero.matrix()))
    }
}

#[derive(Clone, Debug)]
pub struct ReservoirModel {
    subsystems: Vec<Subsystem>,
}

impl ReservoirModel {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(QrcError::contract("a reservoir needs at least one subsystem"));
        }
        Ok(Self { subsystems })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn n_qubits(&self) -> usize {
        self.subsystems.iter().map(Subsystem::n_qubits).sum()
    }

    /// `|0…0⟩⟨0…0|` on every subsystem.
    pub fn zero_state(&self) -> Vec<DensityOperator> {
        self.subsystems.iter().map(|s| DensityOperator::zeros(s.n_qubits())).collect()
    }

    fn check_state(&self, state: &[DensityOperator]) -> Result<()> {
        if state.len() != self.subsystems.len()
            || state.iter().zip(&self.subsystems).any(|(r, s)| r.n_qubits() != s.n_qubits())
        {
            return Err(QrcError::dim("state list does not match subsystem layout"));
        }
        Ok(())
    }

    pub fn step(&self, state: &[DensityOperator], u: f64) -> Result<Vec<DensityOperator>> {
        self.check_state(state)?;
        self.subsystems.iter().zip(state).map(|(s, r)| s.step(r, u)).collect()
    }

    /// Iterates [`step`](Self::step) and returns the features together with
    /// the final state.
    pub fn run_with_state(
        &self,
        inputs: &[f64],
        init: &[DensityOperator],
    ) -> Result<(FeatureSeries, Vec<DensityOperator>)> {
        self.check_state(init)?;
        for &u in inputs {
            check_input(u)?;
        }
        let mut state = init.to_vec();
        let mut rows = Vec::with_capacity(inputs.len());
        for &u in inputs {
            state = self.step(&state, u)?;
            rows.push(state.iter().flat_map(expect_z_all).collect());
        }
        Ok((FeatureSeries::new(rows, Provenance::Exact)?, state))
    }

    pub fn run(&self, inputs: &[f64], init: &[DensityOperator]) -> Result<FeatureSeries> {
        Ok(self.run_with_state(inputs, init)?.0)
    }
}

/// Applies the single-qubit channel `c` to every qubit after each branch and
/// to every `σ`.
pub fn wrap_local_noise(model: &ReservoirModel, c: &QuantumChannel) -> Result<ReservoirModel> {
    if c.n_qubits() != 1 {
        return Err(QrcError::dim("local noise must be a single-qubit channel"));
    }
    let subs = model
        .subsystems
        .iter()
        .map(|s| {
            let mut s = s.clone();
            let n = s.n_qubits();
            let added = (0..n).map(|q| on_qubit(c, q, n)).collect::<Result<Vec<_>>>()?;
            let mut sigma = s.sigma.matrix().clone();
            for a in &added {
                sigma = a.apply_operator(&sigma)?;
            }
            s.sigma = DensityOperator::checked_cheap(sigma)?;
            s.noise.extend(added);
            Ok(s)
        })
        .collect::<Result<_>>()?;
    ReservoirModel::new(subs)
}

/// Builds a one-subsystem model with `T_j(ρ) = U_j ρ U_j†`.
pub fn make_subclass_model(u0: &Circuit, u1: &Circuit, eps: f64, sigma: DensityOperator) -> Result<ReservoirModel> {
    if u0.n_qubits() != u1.n_qubits() {
        return Err(QrcError::dim("U0 and U1 act on different widths"));
    }
    let t0 = QuantumChannel::from_circuit_unitary(circuit_unitary(u0));
    let t1 = QuantumChannel::from_circuit_unitary(circuit_unitary(u1));
    let mut sub = Subsystem::new(t0, t1, eps, sigma)?;
    sub.circuits = Some((u0.clone(), u1.clone()));
    ReservoirModel::new(vec![sub])
}

/// `T_j ← N∘T_j`, `σ ← N(σ)` on every subsystem. The circuit view is
/// dropped since the wrapped maps are no longer unitary.
pub fn wrap_noise(model: &ReservoirModel, noise: &[QuantumChannel]) -> Result<ReservoirModel> {
    if noise.len() != model.subsystems.len() {
        return Err(QrcError::dim("need one noise channel per subsystem"));
    }
    let subs = model
        .subsystems
        .iter()
        .zip(noise)
        .map(|(s, n)| {
            if n.n_qubits() != s.n_qubits() {
                return Err(QrcError::dim("noise channel width does not match subsystem"));
            }
            let (mut t0, mut t1) = (s.t0.clone(), s.t1.clone());
            for c in s.noise.iter().chain(std::iter::once(n)) {
                t0 = compose(c, &t0)?;
                t1 = compose(c, &t1)?;
            }
            Subsystem::new(t0, t1, s.eps, n.apply(&s.sigma)?)
        })
        .collect::<Result<_>>()?;
    ReservoirModel::new(subs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled {
        n_m: usize,
        shots: usize,
        scheme: Scheme,
        window: Option<usize>,
    },
    Multiplexed(Vec<Provenance>),
}

/// `L × n` table of `⟨Z^(i)⟩_l`, optionally with the raw outcome counts
/// (`L × 2^n`) they were computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSeries {
    rows: Vec<Vec<f64>>,
    provenance: Provenance,
    counts: Option<Vec<Vec<u64>>>,
}

impl FeatureSeries {
    pub fn new(rows: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(QrcError::dim("feature rows have different widths"));
            }
        }
        if rows.iter().flatten().any(|&v| !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v)) {
            return Err(QrcError::contract("feature outside [-1, 1]"));
        }
        Ok(Self {
            rows,
            provenance,
            counts: None,
        })
    }

    pub fn with_counts(mut self, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != self.rows.len() {
            return Err(QrcError::dim("one count vector per time step expected"));
        }
        self.counts = Some(counts);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.rows[l]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn counts(&self) -> Option<&[Vec<u64>]> {
        self.counts.as_deref()
    }

    /// Rows `range` as a new series (counts sliced alongside).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            rows: self.rows[range.clone()].to_vec(),
            provenance: self.provenance.clone(),
            counts: self.counts.as_ref().map(|c| c[range].to_vec()),
        }
    }
}

/// Horizontal concatenation of feature columns.
pub fn multiplex(series: &[FeatureSeries]) -> Result<FeatureSeries> {
    let first = series
        .first()
        .ok_or_else(|| QrcError::contract("multiplex needs at least one series"))?;
    if series.len() == 1 {
        return Ok(first.clone());
    }
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(QrcError::dim("multiplexed series differ in length"));
    }
    let rows = (0..first.len())
        .map(|l| series.iter().flat_map(|s| s.rows[l].iter().copied()).collect())
        .collect();
    FeatureSeries::new(
        rows,
        Provenance::Multiplexed(series.iter().map(|s| s.provenance.clone()).collect()),
    )
}

/// Monomials of total degree `1..=R` in `n` variables, each a nondecreasing
/// list of variable indices (repeats encode powers). Ordered by degree, then
/// lexicographically.
pub fn monomials(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut level: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..degree {
        let next: Vec<Vec<usize>> = level
            .iter()
            .flat_map(|m| {
                let start = m.last().copied().unwrap_or(0);
                (start..n).map(move |i| {
                    let mut e = m.clone();
                    e.push(i);
                    e
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Human-readable monomial label, e.g. `z0*z0*z3`.
pub fn monomial_label(m: &[usize]) -> String {
    m.iter().map(|i| format!("z{i}")).collect::<Vec<_>>().join("*")
}

/// Evaluates every monomial of `monomials(row.len(), degree)` on one row.
pub fn expand_row(row: &[f64], degree: usize) -> Vec<f64> {
    monomials(row.len(), degree)
        .iter()
        .map(|m| m.iter().map(|&i| row[i]).product())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub degree: usize,
    pub n_vars: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ReadoutModel {
    pub fn new(degree: usize, n_vars: usize, weights: Vec<f64>, bias: f64) -> Result<Self> {
        if degree == 0 {
            return Err(QrcError::contract("readout degree must be at least 1"));
        }
        let need = monomials(n_vars, degree).len();
        if weights.len() != need {
            return Err(QrcError::dim(format!(
                "degree-{degree} readout on {n_vars} variables needs {need} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self {
            degree,
            n_vars,
            weights,
            bias,
        })
    }

    pub fn evaluate(&self, row: &[f64]) -> f64 {
        expand_row(row, self.degree)
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| m * w)
            .sum::<f64>()
            + self.bias
    }
}

pub fn readout(features: &FeatureSeries, h: &ReadoutModel) -> Result<Vec<f64>> {
    if !features.is_empty() && features.width() != h.n_vars {
        return Err(QrcError::dim(format!(
            "readout expects {} features, series has {}",
            h.n_vars,
            features.width()
        )));
    }
    Ok(features.rows.iter().map(|r| h.evaluate(r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{depolarizing, on_each_qubit, tensor};
    use crate::channels::unitary_channel;
    use crate::circuits::{Gate, Preset};
    use crate::qmath::{expect_z, partial_trace, trace_distance, trace_norm};
    use crate::random::{random_channel, random_density, seeded, SeededRng};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_sub(n: usize, eps: f64, rng: &mut SeededRng) -> Subsystem {
        Subsystem::new(
            random_channel(n, 2, rng),
            random_channel(n, 3, rng),
            eps,
            random_density(n, rng),
        )
        .unwrap()
    }

    fn vigo(eps: f64, seed: u64) -> ReservoirModel {
        let (u0, u1) = Preset::Vigo5.build(&Preset::Vigo5.sample_params(seed)).unwrap();
        make_subclass_model(&u0, &u1, eps, DensityOperator::zeros(5)).unwrap()
    }

    #[test]
    fn full_reset_returns_sigma() {
        let mut rng = seeded(1);
        let s = random_sub(2, 1.0, &mut rng);
        let out = s.step(&random_density(2, &mut rng), 0.37).unwrap();
        assert!(out.matrix().max_abs_diff(s.sigma().matrix()) < 1e-14);
    }

    #[test]
    fn step_matches_direct_formula() {
        let mut rng = seeded(2);
        let s = random_sub(1, 0.23, &mut rng);
        let rho = random_density(1, &mut rng);
        let u = 0.61;
        let mut oracle = ComplexMatrix::zeros(2, 2);
        oracle.add_scaled(s.t0().apply(&rho).unwrap().matrix(), 0.77 * u);
        oracle.add_scaled(s.t1().apply(&rho).unwrap().matrix(), 0.77 * (1.0 - u));
        oracle.add_scaled(s.sigma().matrix(), 0.23);
        assert!(s.step(&rho, u).unwrap().matrix().max_abs_diff(&oracle) < 1e-14);
        let via_channel = s.channel(u).unwrap().apply(&rho).unwrap();
        assert!(via_channel.matrix().max_abs_diff(&oracle) < 1e-13);
    }

    #[test]
    fn input_domain_is_enforced() {
        let mut rng = seeded(3);
        let s = random_sub(1, 0.1, &mut rng);
        assert!(matches!(s.step(&DensityOperator::zeros(1), 1.2), Err(QrcError::InputDomain(_))));
        assert!(s.step(&DensityOperator::zeros(1), 0.0).is_ok());
        assert!(Subsystem::new(s.t0().clone(), s.t1().clone(), 0.0, s.sigma().clone()).is_err());
    }

    #[test]
    fn steady_state_is_preserved() {
        let m = vigo(0.1, 4);
        let (f, state) = m.run_with_state(&[1.0; 6], &m.zero_state()).unwrap();
        assert!(f.rows().iter().flatten().all(|&z| (z - 1.0).abs() < 1e-12));
        assert!(state[0].matrix().max_abs_diff(DensityOperator::zeros(5).matrix()) < 1e-12);

        let (o0, o1) = Preset::Ourense5.build(&Preset::Ourense5.sample_params(2)).unwrap();
        let ourense = make_subclass_model(&o0, &o1, 0.37, DensityOperator::zeros(5)).unwrap();
        assert!(ourense.subsystems()[0].steady_state_deviation().unwrap() < 1e-14);
    }

    #[test]
    fn identity_circuits_keep_features_at_one() {
        let c = Circuit::empty(2);
        let m = make_subclass_model(&c, &c, 0.1, DensityOperator::zeros(2)).unwrap();
        let f = m.run(&[0.2, 0.9, 0.5], &m.zero_state()).unwrap();
        assert!(f.rows().iter().flatten().all(|&z| (z - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eps_one_gives_sigma_features() {
        let mut rng = seeded(5);
        let s = random_sub(2, 1.0, &mut rng);
        let target = expect_z_all(s.sigma());
        let m = ReservoirModel::new(vec![s]).unwrap();
        let f = m.run(&[0.3, 0.8, 0.0], &m.zero_state()).unwrap();
        for row in f.rows() {
            for (a, b) in row.iter().zip(&target) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn product_evolution_matches_joint_oracle() {
        let mut rng = seeded(6);
        let a = random_sub(1, 0.2, &mut rng);
        let b = random_sub(1, 0.35, &mut rng);
        let m = ReservoirModel::new(vec![a.clone(), b.clone()]).unwrap();
        let inputs: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let init = vec![random_density(1, &mut rng), random_density(1, &mut rng)];
        let (f, state) = m.run_with_state(&inputs, &init).unwrap();

        let mut joint = init[0].kron(&init[1]);
        for (l, &u) in inputs.iter().enumerate() {
            let t = tensor(&a.channel(u).unwrap(), &b.channel(u).unwrap());
            joint = t.apply(&joint).unwrap();
            for i in 0..2 {
                assert!((expect_z(&joint, i).unwrap() - f.row(l)[i]).abs() < 1e-12);
            }
        }
        for (k, part) in state.iter().enumerate() {
            let reduced = partial_trace(&joint, &[2, 2], &[k]).unwrap();
            assert!(reduced.matrix().max_abs_diff(part.matrix()) < 1e-10);
        }
    }

    #[test]
    fn mixture_semantics_match_channel_mix() {
        let (u0, u1) = Preset::Vigo5.build(&Preset::Vigo5.sample_params(8)).unwrap();
        let m = make_subclass_model(&u0, &u1, 0.1, DensityOperator::zeros(5)).unwrap();
        let s = &m.subsystems()[0];
        let u = 0.3;
        let oracle = mix(
            &[
                unitary_channel(&circuit_unitary(&u0)).unwrap(),
                unitary_channel(&circuit_unitary(&u1)).unwrap(),
                reset_channel(&DensityOperator::zeros(5)),
            ],
            &[0.9 * u, 0.9 * (1.0 - u), 0.1],
        )
        .unwrap();
        let rho = random_density(5, &mut seeded(8));
        let a = s.step(&rho, u).unwrap();
        let b = oracle.apply(&rho).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn readout_examples() {
        let f = FeatureSeries::new(vec![vec![0.5, -0.25], vec![0.1, 0.9]], Provenance::Exact).unwrap();
        let zero = ReadoutModel::new(1, 2, vec![0.0, 0.0], 0.3).unwrap();
        assert_eq!(readout(&f, &zero).unwrap(), vec![0.3, 0.3]);
        let pick = ReadoutModel::new(1, 2, vec![0.0, 1.0], 0.5).unwrap();
        assert_eq!(readout(&f, &pick).unwrap(), vec![0.25, 1.4]);

        // degree 2 on (a, b): a, b, a², ab, b²
        assert_eq!(monomials(2, 2), vec![vec![0], vec![1], vec![0, 0], vec![0, 1], vec![1, 1]]);
        let h = ReadoutModel::new(2, 2, vec![1.0, -2.0, 3.0, 0.5, 4.0], 0.1).unwrap();
        let y = readout(&f, &h).unwrap();
        for (row, got) in f.rows().iter().zip(y) {
            let (a, b) = (row[0], row[1]);
            let sym = a - 2.0 * b + 3.0 * a * a + 0.5 * a * b + 4.0 * b * b + 0.1;
            assert!((got - sym).abs() < 1e-15);
        }
        assert!(readout(&f, &ReadoutModel::new(1, 3, vec![0.0; 3], 0.0).unwrap()).is_err());
        assert!(ReadoutModel::new(2, 2, vec![0.0; 4], 0.0).is_err());
    }

    #[test]
    fn monomial_counts() {
        // C(n + R, R) − 1
        assert_eq!(monomials(5, 1).len(), 5);
        assert_eq!(monomials(5, 2).len(), 20);
        assert_eq!(monomials(3, 3).len(), 19);
    }

    #[test]
    fn noise_wrapping() {
        let mut rng = seeded(9);
        let s = random_sub(1, 0.3, &mut rng);
        let m = ReservoirModel::new(vec![s.clone()]).unwrap();
        let same = wrap_noise(&m, &[QuantumChannel::identity(1)]).unwrap();
        let rho = random_density(1, &mut rng);
        let a = same.subsystems()[0].step(&rho, 0.4).unwrap();
        assert!(a.matrix().max_abs_diff(s.step(&rho, 0.4).unwrap().matrix()) < 1e-14);

        let tau = random_density(1, &mut rng);
        let absorbed = wrap_noise(&m, &[reset_channel(&tau)]).unwrap();
        let sub = &absorbed.subsystems()[0];
        assert!(sub.sigma().matrix().max_abs_diff(tau.matrix()) < 1e-13);
        assert!(sub.t0().apply(&rho).unwrap().matrix().max_abs_diff(tau.matrix()) < 1e-13);
        assert!(wrap_noise(&m, &[QuantumChannel::identity(2)]).is_err());
    }

    #[test]
    fn local_noise_matches_full_width_channel() {
        let m = vigo(0.2, 12);
        let one = compose(&depolarizing(0.05).unwrap(), &crate::channels::amplitude_damping(0.1).unwrap()).unwrap();
        let local = wrap_local_noise(&m, &one).unwrap();
        assert!(local.subsystems()[0].circuits().is_none() && local.subsystems()[0].is_noisy());
        let two = ReservoirModel::new(vec![random_sub(2, 0.3, &mut seeded(13))]).unwrap();
        let full = wrap_noise(&two, &[on_each_qubit(&one, 2).unwrap()]).unwrap();
        let fast = wrap_local_noise(&two, &one).unwrap();
        let u = [0.3, 0.8, 0.1, 0.55];
        let a = full.run(&u, &full.zero_state()).unwrap();
        let b = fast.run(&u, &fast.zero_state()).unwrap();
        for (x, y) in a.rows().iter().flatten().zip(b.rows().iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
        let rho = random_density(2, &mut seeded(14));
        let via_channel = fast.subsystems()[0].channel(0.3).unwrap().apply(&rho).unwrap();
        let direct = fast.subsystems()[0].step(&rho, 0.3).unwrap();
        assert!(via_channel.matrix().max_abs_diff(direct.matrix()) < 1e-12);
    }

    #[test]
    fn noisy_vigo_still_contracts() {
        let m = vigo(0.1, 10);
        let noise = on_each_qubit(&depolarizing(0.05).unwrap(), 5).unwrap();
        let noisy = wrap_noise(&m, &[noise]).unwrap();
        let sub = &noisy.subsystems()[0];
        assert!(sub.t0().trace_preservation_error() < 1e-9);
        let mut rng = seeded(10);
        let inputs: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        let a = noisy.run_with_state(&inputs, &[random_density(5, &mut rng)]).unwrap().1;
        let b = noisy.run_with_state(&inputs, &[random_density(5, &mut rng)]).unwrap().1;
        assert!(trace_distance(&a[0], &b[0]).unwrap() <= 2.0 * 0.9f64.powi(20) + 1e-8);
    }

    #[test]
    fn multiplex_examples() {
        let a = FeatureSeries::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]], Provenance::Exact).unwrap();
        let b = FeatureSeries::new(vec![vec![-0.5], vec![0.6]], Provenance::Exact).unwrap();
        assert_eq!(multiplex(std::slice::from_ref(&a)).unwrap(), a);
        let m = multiplex(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.width(), 3);
        assert_eq!(m.rows(), &[vec![0.1, 0.2, -0.5], vec![0.3, 0.4, 0.6]]);
        let short = FeatureSeries::new(vec![vec![0.0]], Provenance::Exact).unwrap();
        assert!(multiplex(&[a, short]).is_err());

        let five = |seed| {
            let m = vigo(0.1, seed);
            m.run(&[0.2, 0.7], &m.zero_state()).unwrap()
        };
        assert_eq!(multiplex(&[five(1), five(2)]).unwrap().width(), 10);
    }

    #[test]
    fn feature_series_rejects_out_of_range() {
        assert!(FeatureSeries::new(vec![vec![1.5]], Provenance::Exact).is_err());
        assert!(FeatureSeries::new(vec![vec![0.0], vec![0.0, 0.0]], Provenance::Exact).is_err());
    }

    #[test]
    fn single_cx_layer_is_not_steady_without_conjugation_symmetry() {
        // X on qubit 0 as U0 moves |0⟩ away; the deviation must be reported
        let u0 = Circuit::new(1, vec![Gate::Rx { q: 0, angle: std::f64::consts::PI }]).unwrap();
        let m = make_subclass_model(&u0, &u0, 0.5, DensityOperator::zeros(1)).unwrap();
        assert!(m.subsystems()[0].steady_state_deviation().unwrap() > 0.4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn convergence_bound(seed in any::<u64>(), eps in 0.05f64..1.0, len in 1usize..25) {
            let mut rng = seeded(seed);
            let s = random_sub(2, eps, &mut rng);
            let m = ReservoirModel::new(vec![s]).unwrap();
            let inputs: Vec<f64> = (0..len).map(|_| rng.random()).collect();
            let a = m.run_with_state(&inputs, &[random_density(2, &mut rng)]).unwrap().1;
            let b = m.run_with_state(&inputs, &[random_density(2, &mut rng)]).unwrap().1;
            let dist = trace_norm(&(a[0].matrix() - b[0].matrix())).unwrap();
            prop_assert!(dist <= 2.0 * (1.0 - eps).powi(len as i32) + 1e-8);
        }

        #[test]
        fn input_lipschitz(seed in any::<u64>(), eps in 0.05f64..1.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let mut rng = seeded(seed);
            let s = random_sub(2, eps, &mut rng);
            let rho = random_density(2, &mut rng);
            let diff = &s.map_operator(rho.matrix(), x).unwrap() - &s.map_operator(rho.matrix(), y).unwrap();
            prop_assert!(trace_norm(&diff).unwrap() <= 2.0 * (1.0 - eps) * (x - y).abs() + 1e-9);
        }

        #[test]
        fn steps_keep_valid_states(seed in any::<u64>(), u in 0.0f64..=1.0) {
            let mut rng = seeded(seed);
            let s = random_sub(2, 0.1, &mut rng);
            let out = s.step(&random_density(2, &mut rng), u).unwrap();
            prop_assert!(out.invariant_violation() < 1e-9);
        }
    }
}
