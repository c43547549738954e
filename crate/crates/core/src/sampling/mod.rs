//! Shot-based estimation of `⟨Z^(i)⟩_l` by pure-state trajectories.
//!
//! Scheme 1 measures each trajectory only at the final time of interest and
//! re-runs from `|0…0⟩` for every `l`. Scheme 2 measures every step through
//! a non-demolition coupling, which collapses the register in the Z basis
//! and lets one trajectory report all `L` times.
//!
//! Branch draws for trajectory `j` at step `k` are addressed by `(seed, j, k)`
//! (see [`rng::StepStream`]). Re-running a Scheme 1 prefix therefore
//! reproduces exactly the same branch sequence, so the prefix is propagated
//! once and measured at each `l`. Outcome counts are integers and are summed
//! across trajectories, which makes the result independent of thread count.

pub mod rng;
mod statevector;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{compose, computational_dephasing};
use crate::error::{QrcError, Result};
use crate::qmath::{z_sign, C64, TAU_HERM};
use crate::reservoir::{check_input, multiplex, FeatureSeries, Provenance, ReservoirModel, Subsystem};

pub use statevector::{sample_counts, sample_index, Statevector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Scheme1,
    Scheme2Qnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_m: usize,
    pub shots: usize,
    pub scheme: Scheme,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl SamplerConfig {
    pub fn new(n_m: usize, shots: usize, scheme: Scheme, seed: u64) -> Self {
        Self {
            n_m,
            shots,
            scheme,
            window: None,
            seed,
            parallel: true,
        }
    }

    pub fn with_window(mut self, m: usize) -> Self {
        self.window = Some(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_m == 0 {
            return Err(QrcError::config("sampler.n_m", "must be at least 1"));
        }
        if self.shots == 0 {
            return Err(QrcError::config("sampler.shots", "must be at least 1"));
        }
        if self.window == Some(0) {
            return Err(QrcError::config("sampler.window", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    ApplyU0,
    ApplyU1,
    Reset,
}

/// Maps a uniform `x ∈ [0,1)` to a branch with probabilities
/// `((1−ε)u, (1−ε)(1−u), ε)`.
pub fn branch_from_uniform(u: f64, eps: f64, x: f64) -> Branch {
    if x < eps {
        Branch::Reset
    } else if x < eps + (1.0 - eps) * u {
        Branch::ApplyU0
    } else {
        Branch::ApplyU1
    }
}

pub fn sample_branch(u: f64, eps: f64, rng: &mut impl Rng) -> Branch {
    branch_from_uniform(u, eps, rng.random())
}

/// Pure-state unravelling of one circuit subsystem.
#[derive(Clone, Debug)]
pub struct TrajectoryModel {
    n_qubits: usize,
    u0: crate::circuits::Circuit,
    u1: crate::circuits::Circuit,
    eps: f64,
    /// `(cumulative weight, eigenvector)` of σ.
    sigma_ensemble: Vec<(f64, Statevector)>,
}

impl TrajectoryModel {
    pub fn from_subsystem(s: &Subsystem) -> Result<Self> {
        let (u0, u1) = s
            .circuits()
            .ok_or_else(|| QrcError::contract("trajectory sampling needs a circuit-defined subsystem"))?
            .clone();
        let (vals, vecs) = s.sigma().matrix().hermitian_eigen(TAU_HERM)?;
        let mut acc = 0.0;
        let mut sigma_ensemble = Vec::new();
        for (k, &lam) in vals.iter().enumerate() {
            if lam > 1e-12 {
                acc += lam;
                let mut v: Vec<C64> = vecs.column(k);
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.iter_mut().for_each(|z| *z /= norm);
                sigma_ensemble.push((acc, Statevector::new(v)?));
            }
        }
        for entry in &mut sigma_ensemble {
            entry.0 /= acc;
        }
        Ok(Self {
            n_qubits: s.n_qubits(),
            u0,
            u1,
            eps: s.eps(),
            sigma_ensemble,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// One step driven by the two uniforms drawn for it.
    pub fn step(&self, psi: &mut Statevector, u: f64, (x, y): (f64, f64)) {
        match branch_from_uniform(u, self.eps, x) {
            Branch::ApplyU0 => psi.apply(&self.u0),
            Branch::ApplyU1 => psi.apply(&self.u1),
            Branch::Reset => {
                let k = self
                    .sigma_ensemble
                    .iter()
                    .position(|(c, _)| y < *c)
                    .unwrap_or(self.sigma_ensemble.len() - 1);
                psi.assign(&self.sigma_ensemble[k].1);
            }
        }
    }
}

/// Sums per-item outcome counts (`L × 2^n`, flattened) over `items` work
/// items.
fn accumulate<F>(items: usize, len: usize, parallel: bool, f: F) -> Vec<u64>
where
    F: Fn(usize, &mut [u64]) + Sync,
{
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        a
    };
    if parallel {
        (0..items)
            .into_par_iter()
            .fold(
                || vec![0u64; len],
                |mut acc, j| {
                    f(j, &mut acc);
                    acc
                },
            )
            .reduce(|| vec![0u64; len], add)
    } else {
        let mut acc = vec![0u64; len];
        for j in 0..items {
            f(j, &mut acc);
        }
        acc
    }
}

fn features_from_counts(counts: &[Vec<u64>], n: usize) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|c| {
            let total: u64 = c.iter().sum();
            (0..n)
                .map(|i| {
                    let s: f64 = c.iter().enumerate().map(|(b, &k)| z_sign(b, i, n) * k as f64).sum();
                    s / total as f64
                })
                .collect()
        })
        .collect()
}

/// The `min(M, l)` most recent inputs up to time `l` (1-based).
pub fn truncate_window(inputs: &[f64], l: usize, m: usize) -> &[f64] {
    let start = l.saturating_sub(m);
    &inputs[start..l]
}

fn window_start(l: usize, window: Option<usize>) -> usize {
    match window {
        Some(m) if m < l => l - m + 1,
        _ => 1,
    }
}

fn sample_subsystem(tm: &TrajectoryModel, inputs: &[f64], cfg: &SamplerConfig, seed: u64) -> Result<FeatureSeries> {
    let n = tm.n_qubits;
    let dim = 1usize << n;
    let big_l = inputs.len();
    let flat = match cfg.scheme {
        Scheme::Scheme1 => accumulate(cfg.n_m, big_l * dim, cfg.parallel, |j, acc| {
            let mut steps = rng::StepStream::new(seed, j as u64);
            let mut meas = rng::stream(seed, rng::MEASURE, j as u64, 0);
            let mut psi = Statevector::basis(n, 0);
            let mut reached = 0;
            for l in 1..=big_l {
                let start = window_start(l, cfg.window);
                if start > 1 || reached == 0 {
                    psi.set_basis(0);
                    reached = start - 1;
                }
                for k in reached + 1..=l {
                    tm.step(&mut psi, inputs[k - 1], steps.at(k));
                }
                reached = l;
                let slot = &mut acc[(l - 1) * dim..l * dim];
                sample_counts(&psi.probabilities(), cfg.shots as u64, &mut meas, slot);
            }
        }),
        Scheme::Scheme2Qnd => accumulate(cfg.n_m * cfg.shots, big_l * dim, cfg.parallel, |j, acc| {
            let mut steps = rng::StepStream::new(seed, j as u64);
            let mut meas = rng::stream(seed, rng::MEASURE, j as u64, 0);
            let mut psi = Statevector::basis(n, 0);
            match cfg.window {
                None => {
                    for l in 1..=big_l {
                        tm.step(&mut psi, inputs[l - 1], steps.at(l));
                        let b = psi.measure_all(&mut meas);
                        acc[(l - 1) * dim + b] += 1;
                    }
                }
                Some(_) => {
                    for l in 1..=big_l {
                        psi.set_basis(0);
                        let mut b = 0;
                        for k in window_start(l, cfg.window)..=l {
                            tm.step(&mut psi, inputs[k - 1], steps.at(k));
                            b = psi.measure_all(&mut meas);
                        }
                        acc[(l - 1) * dim + b] += 1;
                    }
                }
            }
        }),
    };
    let counts: Vec<Vec<u64>> = flat.chunks(dim.max(1)).map(<[u64]>::to_vec).collect();
    let rows = features_from_counts(&counts, n);
    FeatureSeries::new(
        rows,
        Provenance::Sampled {
            n_m: cfg.n_m,
            shots: cfg.shots,
            scheme: cfg.scheme,
            window: cfg.window,
        },
    )?
    .with_counts(counts)
}

/// Sampled features for every subsystem of a circuit-defined model; several
/// subsystems are sampled with derived seeds and multiplexed.
pub fn estimate(model: &ReservoirModel, inputs: &[f64], cfg: &SamplerConfig) -> Result<FeatureSeries> {
    cfg.validate()?;
    for &u in inputs {
        check_input(u)?;
    }
    let subs = model.subsystems();
    let parts = subs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let seed = if subs.len() == 1 {
                cfg.seed
            } else {
                rng::derive_seed(cfg.seed, rng::SUBSYSTEM, k as u64)
            };
            sample_subsystem(&TrajectoryModel::from_subsystem(s)?, inputs, cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    multiplex(&parts)
}

pub fn scheme1_estimate(model: &ReservoirModel, inputs: &[f64], cfg: &SamplerConfig) -> Result<FeatureSeries> {
    if cfg.scheme != Scheme::Scheme1 {
        return Err(QrcError::config("sampler.scheme", "scheme1_estimate needs scheme1"));
    }
    estimate(model, inputs, cfg)
}

pub fn scheme2_qnd_estimate(model: &ReservoirModel, inputs: &[f64], cfg: &SamplerConfig) -> Result<FeatureSeries> {
    if cfg.scheme != Scheme::Scheme2Qnd {
        return Err(QrcError::config("sampler.scheme", "scheme2_qnd_estimate needs scheme2_qnd"));
    }
    estimate(model, inputs, cfg)
}

/// The model whose exact evolution Scheme 2 samples: `T_j ← T_j∘D` with `D`
/// complete dephasing in the computational basis.
pub fn qnd_exact_model(model: &ReservoirModel) -> Result<ReservoirModel> {
    let subs = model
        .subsystems()
        .iter()
        .map(|s| {
            let d = computational_dephasing(s.n_qubits());
            Subsystem::new(compose(s.t0(), &d)?, compose(s.t1(), &d)?, s.eps(), s.sigma().clone())
        })
        .collect::<Result<_>>()?;
    ReservoirModel::new(subs)
}

/// Exact features when every `l` restarts from `|0…0⟩` at time `l − M`.
pub fn exact_truncated(model: &ReservoirModel, inputs: &[f64], m: usize) -> Result<FeatureSeries> {
    if m == 0 {
        return Err(QrcError::InputDomain("window must be at least 1".into()));
    }
    let rows = (1..=inputs.len())
        .map(|l| {
            let f = model.run(truncate_window(inputs, l, m), &model.zero_state())?;
            Ok(f.rows().last().expect("window is nonempty").clone())
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSeries::new(rows, Provenance::Exact)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cost {
    pub circuit_runs: u64,
    pub channel_applications: u64,
    pub formula: String,
}

/// Hardware cost of estimating all `L` feature rows.
///
/// With a window `M`, Scheme 1 counts the exact number of applications
/// `N_m·S·Σ_l min(M, l)` (at most `N_m·S·L·M`). Scheme 2 with a window is
/// reported per estimate: `N_m·S` runs of `min(M, L)` applications each.
pub fn cost(big_l: usize, cfg: &SamplerConfig) -> Cost {
    let base = (cfg.n_m * cfg.shots) as u64;
    let l = big_l as u64;
    match (cfg.scheme, cfg.window) {
        (Scheme::Scheme1, None) => Cost {
            circuit_runs: base * l,
            channel_applications: base * l * (l + 1) / 2,
            formula: "runs = N_m*S*L; applications = N_m*S*L*(L+1)/2".into(),
        },
        (Scheme::Scheme1, Some(m)) => {
            let m = m as u64;
            let apps: u64 = (1..=l).map(|k| k.min(m)).sum();
            Cost {
                circuit_runs: base * l,
                channel_applications: base * apps,
                formula: "runs = N_m*S*L; applications = N_m*S*sum_l min(M,l) <= N_m*S*L*M".into(),
            }
        }
        (Scheme::Scheme2Qnd, None) => Cost {
            circuit_runs: base,
            channel_applications: base * l,
            formula: "runs = N_m*S; applications = N_m*S*L".into(),
        },
        (Scheme::Scheme2Qnd, Some(m)) => Cost {
            circuit_runs: base,
            channel_applications: base * l.min(m as u64),
            formula: "per estimate: runs = N_m*S; applications = N_m*S*min(M,L)".into(),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorStats {
    pub mean: f64,
    /// Unbiased (`n − 1`) sample variance; zero for a single sample.
    pub sample_variance: f64,
}

pub fn estimator_stats(samples: &[f64]) -> Result<EstimatorStats> {
    if samples.is_empty() {
        return Err(QrcError::UndefinedMetric("no samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sample_variance = if samples.len() < 2 {
        0.0
    } else {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    Ok(EstimatorStats { mean, sample_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{Circuit, Gate, Preset};
    use crate::qmath::DensityOperator;
    use crate::random::{random_density, seeded};
    use crate::reservoir::make_subclass_model;

    fn one_qubit_model(eps: f64, seed: u64) -> ReservoirModel {
        let p = crate::circuits::GateParams::sample(seed, 0, 2);
        let u0 = Circuit::new(1, vec![Gate::u3(0, p.phi[0])]).unwrap();
        let u1 = Circuit::new(1, vec![Gate::u3(0, p.phi[1])]).unwrap();
        make_subclass_model(&u0, &u1, eps, DensityOperator::zeros(1)).unwrap()
    }

    #[test]
    fn branch_examples() {
        let mut rng = seeded(1);
        for _ in 0..1000 {
            assert_eq!(sample_branch(0.4, 1.0, &mut rng), Branch::Reset);
            assert_eq!(sample_branch(1.0, 0.0, &mut rng), Branch::ApplyU0);
        }
    }

    #[test]
    fn branch_frequencies() {
        let mut rng = seeded(2);
        let trials = 1_000_000;
        let mut hits = [0usize; 3];
        for _ in 0..trials {
            hits[sample_branch(0.3, 0.1, &mut rng) as usize] += 1;
        }
        for (h, p) in hits.iter().zip([0.27, 0.63, 0.10]) {
            let sd = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((*h as f64 / trials as f64 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn full_reset_gives_plus_one() {
        let (u0, u1) = Preset::Vigo5.build(&Preset::Vigo5.sample_params(1)).unwrap();
        let m = make_subclass_model(&u0, &u1, 1.0, DensityOperator::zeros(5)).unwrap();
        for scheme in [Scheme::Scheme1, Scheme::Scheme2Qnd] {
            let f = estimate(&m, &[0.1, 0.5, 0.9], &SamplerConfig::new(16, 4, scheme, 3)).unwrap();
            assert!(f.rows().iter().flatten().all(|&z| z == 1.0));
        }
    }

    #[test]
    fn scheme1_tracks_exact_features() {
        let m = one_qubit_model(0.2, 4);
        let inputs = [0.3, 0.8, 0.1, 0.6];
        let exact = m.run(&inputs, &m.zero_state()).unwrap();
        let cfg = SamplerConfig::new(1 << 16, 1, Scheme::Scheme1, 5);
        let est = estimate(&m, &inputs, &cfg).unwrap();
        for l in 0..inputs.len() {
            let z = exact.row(l)[0];
            let sd = ((1.0 - z * z) / (1 << 16) as f64).sqrt();
            assert!((est.row(l)[0] - z).abs() <= 5.0 * sd, "l={l}");
        }
    }

    #[test]
    fn scheme1_window_matches_restart_semantics() {
        let m = one_qubit_model(0.3, 6);
        let inputs = [0.2, 0.7, 0.4, 0.9, 0.5];
        let w = 2;
        let exact = exact_truncated(&m, &inputs, w).unwrap();
        let cfg = SamplerConfig::new(1 << 16, 1, Scheme::Scheme1, 7).with_window(w);
        let est = estimate(&m, &inputs, &cfg).unwrap();
        for l in 0..inputs.len() {
            let z = exact.row(l)[0];
            let sd = ((1.0 - z * z) / (1 << 16) as f64).sqrt().max(1e-12);
            assert!((est.row(l)[0] - z).abs() <= 5.0 * sd);
        }
    }

    #[test]
    fn qnd_matches_dephased_model() {
        let (u0, u1) = Preset::Vigo5.build(&Preset::Vigo5.sample_params(8)).unwrap();
        let m = make_subclass_model(&u0, &u1, 0.1, DensityOperator::zeros(5)).unwrap();
        let inputs = [0.4, 0.9, 0.2, 0.6];
        let exact = qnd_exact_model(&m).unwrap().run(&inputs, &m.zero_state()).unwrap();
        let n = 1 << 14;
        let est = estimate(&m, &inputs, &SamplerConfig::new(n, 1, Scheme::Scheme2Qnd, 9)).unwrap();
        for l in 0..inputs.len() {
            for i in 0..5 {
                let z = exact.row(l)[i];
                let sd = ((1.0 - z * z) / n as f64).sqrt().max(1e-12);
                assert!((est.row(l)[i] - z).abs() <= 5.0 * sd);
            }
        }
    }

    #[test]
    fn outcome_records_commute() {
        let m = one_qubit_model(0.2, 10);
        let inputs = [0.5, 0.5, 0.5];
        let cfg = SamplerConfig::new(64, 2, Scheme::Scheme2Qnd, 11);
        let serial = estimate(&m, &inputs, &SamplerConfig { parallel: false, ..cfg.clone() }).unwrap();
        let par = estimate(&m, &inputs, &cfg).unwrap();
        assert_eq!(serial, par);
    }

    #[test]
    fn determinism() {
        let (u0, u1) = Preset::Ourense5.build(&Preset::Ourense5.sample_params(3)).unwrap();
        let m = make_subclass_model(&u0, &u1, 0.1, DensityOperator::zeros(5)).unwrap();
        let cfg = SamplerConfig::new(32, 64, Scheme::Scheme1, 12);
        let a = estimate(&m, &[0.2, 0.4, 0.8], &cfg).unwrap();
        let b = estimate(&m, &[0.2, 0.4, 0.8], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts().unwrap()[0].iter().sum::<u64>(), 32 * 64);
        let c = estimate(&m, &[0.2, 0.4, 0.8], &SamplerConfig { seed: 13, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mixed_sigma_reset_uses_eigen_ensemble() {
        let sigma = random_density(1, &mut seeded(14));
        let c = Circuit::empty(1);
        let m = make_subclass_model(&c, &c, 1.0, sigma.clone()).unwrap();
        let n = 1 << 16;
        let f = estimate(&m, &[0.5], &SamplerConfig::new(n, 1, Scheme::Scheme1, 15)).unwrap();
        let z = crate::qmath::expect_z(&sigma, 0).unwrap();
        assert!((f.row(0)[0] - z).abs() < 5.0 * ((1.0 - z * z) / n as f64).sqrt());
    }

    #[test]
    fn window_helper() {
        let u = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(truncate_window(&u, 3, 10), &u[..3]);
        assert_eq!(truncate_window(&u, 3, 1), &u[2..3]);
        assert_eq!(truncate_window(&u, 4, 2), &u[2..4]);
    }

    #[test]
    fn truncation_bound_exact() {
        let mut rng = seeded(16);
        let (u0, u1) = Preset::Vigo5.build(&Preset::Vigo5.sample_params(16)).unwrap();
        let m = make_subclass_model(&u0, &u1, 0.1, DensityOperator::zeros(5)).unwrap();
        let inputs: Vec<f64> = (0..15).map(|_| rng.random()).collect();
        let full = m.run(&inputs, &m.zero_state()).unwrap();
        for w in [1, 3, 5] {
            let t = exact_truncated(&m, &inputs, w).unwrap();
            for (a, b) in t.rows().iter().flatten().zip(full.rows().iter().flatten()) {
                assert!((a - b).abs() <= 2.0 * 0.9f64.powi(w as i32) + 1e-12);
            }
        }
    }

    #[test]
    fn cost_examples() {
        let c = cost(30, &SamplerConfig::new(1024, 1024, Scheme::Scheme1, 0));
        assert_eq!((c.circuit_runs, c.channel_applications), (31_457_280, 487_587_840));
        let c = cost(1, &SamplerConfig::new(7, 3, Scheme::Scheme1, 0));
        assert_eq!((c.circuit_runs, c.channel_applications), (21, 21));
        let c = cost(30, &SamplerConfig::new(1024, 1, Scheme::Scheme2Qnd, 0));
        assert_eq!((c.circuit_runs, c.channel_applications), (1024, 30_720));
        let c = cost(30, &SamplerConfig::new(2, 3, Scheme::Scheme1, 0).with_window(5));
        assert!(c.channel_applications <= 6 * 30 * 5);
        assert_eq!(c.channel_applications, 6 * (1 + 2 + 3 + 4 + 5 * 26));
    }

    #[test]
    fn stats_examples() {
        let s = estimator_stats(&[0.4; 10]).unwrap();
        assert!((s.mean - 0.4).abs() < 1e-15 && s.sample_variance < 1e-30);
        let mut rng = seeded(17);
        let coin: Vec<f64> = (0..100_000).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        assert!((estimator_stats(&coin).unwrap().sample_variance - 1.0).abs() < 0.01);
        // ±1 draws with ⟨Z⟩ = 0.6: variance 1 − 0.36
        let biased: Vec<f64> = (0..100_000).map(|_| if rng.random::<f64>() < 0.8 { 1.0 } else { -1.0 }).collect();
        let v = estimator_stats(&biased).unwrap().sample_variance;
        assert!((v - 0.64).abs() < 0.02);
        assert!(estimator_stats(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(0, 1, Scheme::Scheme1, 0).validate().is_err());
        assert!(SamplerConfig::new(1, 1, Scheme::Scheme1, 0).with_window(0).validate().is_err());
        let m = one_qubit_model(0.1, 1);
        assert!(scheme1_estimate(&m, &[0.5], &SamplerConfig::new(1, 1, Scheme::Scheme2Qnd, 0)).is_err());
    }
}
