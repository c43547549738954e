//! Property suites with measured values and their bounds.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::definition::preset_model;
use crate::circuits::{build_boeblingen_pair, linear_chain, Circuit, GateParams, Preset};
use crate::error::{QrcError, Result};
use crate::learn::{verify_readout_invariance, CalibrationMatrix, FeatureMap};
use crate::qmath::{trace_norm, DensityOperator};
use crate::random::{random_channel, random_density, random_pure_density, seeded, SeededRng};
use crate::reservoir::{make_subclass_model, ReservoirModel, Subsystem};
use crate::sampling::{estimate, exact_truncated, qnd_exact_model, SamplerConfig, Scheme};
use crate::tasks::{make_task, TaskId};
use crate::theory_checks::{
    explicit_channel, explicit_z_trajectory, iteration_vs_series, separation_witness, transfer_matrix,
    transfer_z_trajectory, SeparationModel,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Convergence,
    Fading,
    Estimator,
    Truncation,
    ReadoutInvariance,
    Separation,
    Qnd,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Convergence,
        Suite::Fading,
        Suite::Estimator,
        Suite::Truncation,
        Suite::ReadoutInvariance,
        Suite::Separation,
        Suite::Qnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Convergence => "convergence",
            Suite::Fading => "fading",
            Suite::Estimator => "estimator",
            Suite::Truncation => "truncation",
            Suite::ReadoutInvariance => "readout_invariance",
            Suite::Separation => "separation",
            Suite::Qnd => "qnd",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Suite::All)
            .chain(Suite::EACH)
            .find(|x| x.name() == s)
            .ok_or_else(|| QrcError::config("suite", format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    /// Distance to the bound on the passing side; negative when failing.
    pub margin: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn at_most(suite: Suite, name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(suite, name.into(), measured, Relation::AtMost, bound)
    }

    pub fn at_least(suite: Suite, name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(suite, name.into(), measured, Relation::AtLeast, bound)
    }

    fn new(suite: Suite, name: String, measured: f64, relation: Relation, bound: f64) -> Self {
        let margin = match relation {
            Relation::AtMost => bound - measured,
            Relation::AtLeast => measured - bound,
        };
        Self {
            suite,
            name,
            measured,
            relation,
            bound,
            margin,
            passed: margin >= 0.0,
        }
    }

    pub fn csv_line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        format!(
            "{},{},{:.6e},{rel},{:.6e},{:.6e},{}",
            self.suite,
            self.name,
            self.measured,
            self.bound,
            self.margin,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

pub const CSV_HEADER: &str = "suite,check,measured,relation,bound,margin,status";

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const EPS: f64 = 0.1;

/// Random single-subsystem model on `n` qubits with random channels and a
/// random reset state.
pub fn random_model(n: usize, eps: f64, rng: &mut SeededRng) -> Result<ReservoirModel> {
    let k0 = rng.random_range(1..=3);
    let k1 = rng.random_range(1..=3);
    let sub = Subsystem::new(random_channel(n, k0, rng), random_channel(n, k1, rng), eps, random_density(n, rng))?;
    ReservoirModel::new(vec![sub])
}

fn uniform_inputs(len: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..len).map(|_| rng.random()).collect()
}

fn final_distance(model: &ReservoirModel, inputs: &[f64], a: DensityOperator, b: DensityOperator) -> Result<f64> {
    let (_, sa) = model.run_with_state(inputs, &[a])?;
    let (_, sb) = model.run_with_state(inputs, &[b])?;
    trace_norm(&(sa[0].matrix() - sb[0].matrix()))
}

/// Trace-norm distance after `L = 50` steps from two initial states.
pub fn convergence(samples: usize, presets: &[Preset], seed: u64) -> Result<Vec<CheckResult>> {
    const L: i32 = 50;
    let bound = 2.0 * (1.0 - EPS).powi(L) + 1e-8;
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let n = rng.random_range(1..=2);
        let model = random_model(n, EPS, &mut rng)?;
        let inputs = uniform_inputs(L as usize, &mut rng);
        let (a, b) = (random_density(n, &mut rng), random_density(n, &mut rng));
        worst = worst.max(final_distance(&model, &inputs, a, b)?);
    }
    let mut out = vec![CheckResult::at_most(
        Suite::Convergence,
        format!("random_models_{samples}"),
        worst,
        bound,
    )];
    for &p in presets {
        let model = preset_model(p, seed, EPS)?;
        let inputs = uniform_inputs(L as usize, &mut rng);
        let n = p.n_qubits();
        let d = final_distance(&model, &inputs, DensityOperator::zeros(n), random_pure_density(n, &mut rng))?;
        out.push(CheckResult::at_most(Suite::Convergence, p.name(), d, bound));
    }
    Ok(out)
}

/// `max(‖T(x)ρ − T(y)ρ‖₁ − 2(1−ε)|x−y|)` over sampled `(model, ρ, x, y)`.
pub fn fading(samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    let sample = |s: &Subsystem, rho: &DensityOperator, rng: &mut SeededRng| -> Result<f64> {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let diff = s.step(rho, x)?.matrix() - s.step(rho, y)?.matrix();
        Ok(trace_norm(&diff)? - 2.0 * (1.0 - s.eps()) * (x - y).abs())
    };
    for _ in 0..samples {
        let n = rng.random_range(1..=2);
        let eps = rng.random_range(0.01..1.0);
        let model = random_model(n, eps, &mut rng)?;
        let rho = random_density(n, &mut rng);
        worst = worst.max(sample(&model.subsystems()[0], &rho, &mut rng)?);
    }
    let mut out = vec![CheckResult::at_most(Suite::Fading, format!("random_models_{samples}"), worst, 1e-9)];
    let vigo = preset_model(Preset::Vigo5, seed, EPS)?;
    let mut w = f64::NEG_INFINITY;
    for _ in 0..20 {
        let rho = random_density(5, &mut rng);
        w = w.max(sample(&vigo.subsystems()[0], &rho, &mut rng)?);
    }
    out.push(CheckResult::at_most(Suite::Fading, "vigo5", w, 1e-9));
    Ok(out)
}

/// Random one-qubit circuit reservoir with a U3 gate in each branch.
pub fn single_qubit_model(rng: &mut SeededRng) -> Result<ReservoirModel> {
    let mut gate = || crate::circuits::Gate::u3(0, std::array::from_fn(|_| rng.random_range(-6.0..6.0)));
    let (u0, u1) = (Circuit::new(1, vec![gate()])?, Circuit::new(1, vec![gate()])?);
    let eps = rng.random_range(0.05..0.5);
    make_subclass_model(&u0, &u1, eps, DensityOperator::zeros(1))
}

/// Single-shot z-scores of the last-step estimate for `configs` random
/// one-qubit reservoirs, `(est − exact)/sqrt((1 − exact²)/N_m)` with `S = 1`.
pub fn estimator_zscores(configs: usize, n_m: usize, len: usize, scheme: Scheme, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..configs)
        .map(|c| {
            let model = single_qubit_model(&mut rng)?;
            let inputs = uniform_inputs(len, &mut rng);
            let exact = model.run(&inputs, &model.zero_state())?.rows()[len - 1][0];
            let cfg = SamplerConfig::new(n_m, 1, scheme, seed ^ (c as u64 + 1));
            let est = estimate(&model, &inputs, &cfg)?.rows()[len - 1][0];
            Ok((est - exact) / ((1.0 - exact * exact) / n_m as f64).sqrt())
        })
        .collect()
}

pub const CHI2_LEVEL: f64 = 0.99;

/// Central `CHI2_LEVEL` interval of a χ² law with `k` degrees of freedom.
pub fn chi2_interval(k: usize) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let chi = ChiSquared::new(k as f64).expect("k > 0");
    let tail = (1.0 - CHI2_LEVEL) / 2.0;
    (chi.inverse_cdf(tail), chi.inverse_cdf(1.0 - tail))
}

fn estimator(seed: u64) -> Result<Vec<CheckResult>> {
    let z = estimator_zscores(20, 1 << 14, 5, Scheme::Scheme1, seed)?;
    let max = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sum_sq: f64 = z.iter().map(|v| v * v).sum();
    let (lo, hi) = chi2_interval(z.len());
    Ok(vec![
        CheckResult::at_most(Suite::Estimator, "max_abs_z", max, 5.0),
        CheckResult::at_least(Suite::Estimator, "sum_z2_lower", sum_sq, lo),
        CheckResult::at_most(Suite::Estimator, "sum_z2_upper", sum_sq, hi),
    ])
}

/// `max_{l,i} |⟨Z̃⟩ − ⟨Z⟩|` against `2(1−ε)^M`.
pub fn truncation(preset: Preset, windows: &[usize], seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let model = preset_model(preset, seed, EPS)?;
    let inputs = uniform_inputs(30, &mut rng);
    let exact = model.run(&inputs, &model.zero_state())?;
    windows
        .iter()
        .map(|&m| {
            let t = exact_truncated(&model, &inputs, m)?;
            let diff = t
                .rows()
                .iter()
                .flatten()
                .zip(exact.rows().iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(CheckResult::at_most(
                Suite::Truncation,
                format!("{}_M{m}", preset.name()),
                diff,
                2.0 * (1.0 - EPS).powi(m as i32),
            ))
        })
        .collect()
}

/// Sampled outcome counts of a reservoir together with Task IV targets.
pub fn reservoir_counts(model: &ReservoirModel, len: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rng = seeded(seed);
    let inputs = uniform_inputs(len, &mut rng);
    let f = estimate(model, &inputs, &SamplerConfig::new(64, 64, Scheme::Scheme1, seed))?;
    let counts = f
        .counts()
        .expect("sampled series carry counts")
        .iter()
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    let y = make_task(TaskId::IV, 0, seed)?.eval(&inputs)?;
    Ok((counts, y))
}

/// Column-stochastic, diagonally dominant random confusion matrix.
pub fn random_confusion(d: usize, rng: &mut SeededRng) -> nalgebra::DMatrix<f64> {
    let mut a = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.random_range(0.0..0.15));
    for j in 0..d {
        a[(j, j)] += 1.0;
        let s = a.column(j).sum();
        a.column_mut(j).scale_mut(1.0 / s);
    }
    a
}

/// Two-qubit circuit reservoir for count-level experiments.
pub fn two_qubit_model(seed: u64) -> Result<ReservoirModel> {
    let params = GateParams::sample(seed, 2, 6);
    let (u0, u1) = build_boeblingen_pair(2, 2, 2, &params, &linear_chain(2, 2), &linear_chain(2, 2))?;
    make_subclass_model(&u0, &u1, EPS, DensityOperator::zeros(2))
}

pub fn readout_invariance(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let train: Vec<usize> = (4..23).collect();
    let test: Vec<usize> = (23..30).collect();
    let noisy = |counts: &[Vec<f64>], a: &[CalibrationMatrix]| -> Vec<Vec<f64>> {
        counts.iter().enumerate().map(|(l, c)| a[l % a.len()].forward(c)).collect()
    };

    let (counts, y) = reservoir_counts(&two_qubit_model(seed)?, 30, seed)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let a = CalibrationMatrix::new(random_confusion(4, &mut rng))?;
        let measured = noisy(&counts, std::slice::from_ref(&a));
        let r = verify_readout_invariance(&measured, &[a], &y, &train, &test, FeatureMap::Counts)?;
        worst = worst.max(r.max_abs_diff);
    }
    let mut out = vec![CheckResult::at_most(Suite::ReadoutInvariance, "full_confusion_counts", worst, 1e-6)];

    let (counts, y) = reservoir_counts(&preset_model(Preset::Vigo5, seed, EPS)?, 30, seed)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let factors: Vec<_> = (0..5).map(|_| random_confusion(2, &mut rng)).collect();
        let a = CalibrationMatrix::product(&factors)?;
        let measured = noisy(&counts, std::slice::from_ref(&a));
        let r = verify_readout_invariance(&measured, &[a], &y, &train, &test, FeatureMap::PauliZ)?;
        worst = worst.max(r.max_abs_diff);
    }
    out.push(CheckResult::at_most(Suite::ReadoutInvariance, "product_confusion_pauli_z", worst, 1e-6));

    let varying: Vec<CalibrationMatrix> = (0..30)
        .map(|l| CalibrationMatrix::bit_flip(5, if l % 3 == 0 { 0.02 } else { 0.2 }))
        .collect::<Result<_>>()?;
    let measured = noisy(&counts, &varying);
    let r = verify_readout_invariance(&measured, &varying, &y, &train, &test, FeatureMap::PauliZ)?;
    out.push(CheckResult::at_least(Suite::ReadoutInvariance, "time_varying_counterexample", r.max_abs_diff, 1e-3));
    Ok(out)
}

pub fn separation(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let m = SeparationModel::new(FRAC_PI_4, 0.0, 0.1, 1.0, 0.0)?;
    let d = separation_witness(&[1.0, 0.5, 0.5], &[0.0, 0.5, 0.5], &m)?;
    let mut out = vec![CheckResult::at_most(Suite::Separation, "witness_1.8", (d - 1.8).abs(), 1e-10)];

    let basis = crate::channels::OperatorBasis::pauli(1);
    let (mut matrix_gap, mut traj_gap, mut series_slack) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..20 {
        let m = SeparationModel::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.01..0.99),
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.0..1.0),
        )?;
        let u: f64 = rng.random();
        let s = crate::channels::superoperator_matrix(&explicit_channel(&m, u)?, &basis)?;
        let t = transfer_matrix(&m, u)?;
        for r in 0..4 {
            for c in 0..4 {
                matrix_gap = matrix_gap.max((s.matrix[(r, c)] - crate::qmath::C64::new(t[(r, c)], 0.0)).norm());
            }
        }
        let inputs = uniform_inputs(15, &mut rng);
        let rho = random_density(1, &mut rng);
        let a = explicit_z_trajectory(&m, &inputs, &rho)?;
        let b = transfer_z_trajectory(&m, &inputs, &rho)?;
        traj_gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(traj_gap, f64::max);
        let window = uniform_inputs(rng.random_range(1..40), &mut rng);
        let c = iteration_vs_series(&m, &window, window.len())?;
        series_slack = series_slack.max(c.difference - c.bound);
    }
    out.push(CheckResult::at_most(Suite::Separation, "transfer_vs_channel", matrix_gap, 1e-10));
    out.push(CheckResult::at_most(Suite::Separation, "z_trajectories", traj_gap, 1e-9));
    out.push(CheckResult::at_most(Suite::Separation, "series_vs_iteration_slack", series_slack, 1e-12));
    Ok(out)
}

/// z-scores of Scheme 2 features against the dephased exact model.
pub fn qnd_zscores(model: &ReservoirModel, inputs: &[f64], n_m: usize, shots: usize, seed: u64) -> Result<Vec<f64>> {
    let exact = qnd_exact_model(model)?.run(inputs, &model.zero_state())?;
    let est = estimate(model, inputs, &SamplerConfig::new(n_m, shots, Scheme::Scheme2Qnd, seed))?;
    let n = (n_m * shots) as f64;
    Ok(exact
        .rows()
        .iter()
        .flatten()
        .zip(est.rows().iter().flatten())
        .map(|(&p, &e)| {
            let var = (1.0 - p * p) / n;
            if var > 0.0 {
                (e - p) / var.sqrt()
            } else if e == p {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

fn qnd(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let model = preset_model(Preset::Ourense5, seed, EPS)?;
    let inputs = uniform_inputs(10, &mut rng);
    let z = qnd_zscores(&model, &inputs, 1 << 10, 1 << 4, seed)?;
    let max = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(vec![CheckResult::at_most(Suite::Qnd, "ourense5_max_abs_z", max, 5.0)])
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckResult>> {
    match suite {
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(run_suite(s, seed)?);
            }
            Ok(all)
        }
        Suite::Convergence => convergence(100, &Preset::ALL, seed),
        Suite::Fading => fading(1000, seed),
        Suite::Estimator => estimator(seed),
        Suite::Truncation => truncation(Preset::Vigo5, &[5, 10, 20], seed),
        Suite::ReadoutInvariance => readout_invariance(seed),
        Suite::Separation => separation(seed),
        Suite::Qnd => qnd(seed),
    }
}

pub fn run_checks(suite: Suite, seed: u64) -> Result<CheckReport> {
    Ok(CheckReport {
        checks: run_suite(suite, seed)?,
    })
}
