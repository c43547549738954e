use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use super::config::{ExperimentConfig, ReservoirSpec};
use super::definition;
use super::io::{self, NmseRow, PlotRow};
use crate::channels::{amplitude_damping, compose, depolarizing};
use crate::circuits::Preset;
use crate::error::{QrcError, Result};
use crate::learn::{nmse, ols_fit, write_weights, DesignMatrix, FitOptions};
use crate::reservoir::{multiplex, wrap_local_noise, FeatureSeries, Provenance, ReadoutModel, ReservoirModel};
use crate::sampling::rng::derive_seed;
use crate::sampling::{cost, estimate, Cost, SamplerConfig};
use crate::tasks::{build_dataset, make_task, Dataset, Segment, TaskId};

const CIRCUIT_SALT: u64 = 0x6369_7263;
const SAMPLER_SALT: u64 = 0x7361_6d70;

pub const VERSION: &str = concat!("qrc ", env!("CARGO_PKG_VERSION"));

/// Steady-state deviations above this are reported as warnings.
pub const STEADY_STATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct ReservoirInfo {
    pub name: String,
    pub n_qubits: usize,
    pub circuit_seed: Option<u64>,
    pub steady_state_deviation: f64,
    pub provenance: Provenance,
    pub cost: Option<Cost>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskResult {
    pub task: TaskId,
    pub reservoir: String,
    pub nmse_train: f64,
    pub nmse_test: f64,
    pub weights: ReadoutModel,
}

/// Targets and predictions of one sequence for one task and reservoir.
#[derive(Clone, Debug, Serialize)]
pub struct Panel {
    pub reservoir: String,
    pub task: TaskId,
    pub sequence: usize,
    pub rows: Vec<PlotRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    pub reservoirs: Vec<ReservoirInfo>,
    pub results: Vec<TaskResult>,
    /// `(mean, std)` applied to Task V targets.
    pub standardization: Option<(f64, f64)>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub panels: Vec<Panel>,
    #[serde(skip)]
    pub features: Vec<(String, Vec<FeatureSeries>)>,
    #[serde(skip)]
    pub datasets: Vec<(TaskId, Vec<Dataset>)>,
}

impl RunReport {
    pub fn result(&self, task: TaskId, reservoir: &str) -> Option<&TaskResult> {
        self.results.iter().find(|r| r.task == task && r.reservoir == reservoir)
    }

    pub fn nmse_rows(&self) -> Vec<NmseRow> {
        self.results
            .iter()
            .map(|r| NmseRow {
                task: r.task.to_string(),
                problem: self.config.problem.name().into(),
                reservoir: r.reservoir.clone(),
                nmse_train: r.nmse_train,
                nmse_test: r.nmse_test,
            })
            .collect()
    }
}

struct Built {
    name: String,
    model: ReservoirModel,
    circuit_seed: Option<u64>,
}

fn build_reservoir(cfg: &ExperimentConfig, spec: &ReservoirSpec) -> Result<Built> {
    let (model, circuit_seed) = match spec {
        ReservoirSpec::Preset(name) => {
            let preset: Preset = name.parse()?;
            let seed = derive_seed(cfg.seeds.circuit, CIRCUIT_SALT, preset as u64);
            (definition::preset_model(preset, seed, cfg.eps)?, Some(seed))
        }
        ReservoirSpec::File { file } => (definition::parse(&std::fs::read_to_string(file)?)?, None),
    };
    let model = match &cfg.noise {
        Some(n) => {
            let one = compose(&depolarizing(n.depolarizing)?, &amplitude_damping(n.amplitude_damping)?)?;
            if model.subsystems().iter().any(|s| s.n_qubits() > super::config::MAX_NOISE_QUBITS) {
                return Err(QrcError::config("noise", "noise wrapping supports at most 6 qubits per subsystem"));
            }
            wrap_local_noise(&model, &one)?
        }
        None => model,
    };
    Ok(Built {
        name: spec.label(),
        model,
        circuit_seed,
    })
}

fn add_cost(total: &mut Option<Cost>, c: Cost) {
    match total {
        Some(t) => {
            t.circuit_runs += c.circuit_runs;
            t.channel_applications += c.channel_applications;
        }
        None => *total = Some(c),
    }
}

fn features(
    b: &Built,
    index: usize,
    sampler: Option<SamplerConfig>,
    sequences: &[Dataset],
) -> Result<(Vec<FeatureSeries>, Option<Cost>)> {
    let mut total = None;
    let series = sequences
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let inputs = d.post_washout_inputs();
            match &sampler {
                None => b.model.run(inputs, &b.model.zero_state()),
                Some(s) => {
                    let mut s = s.clone();
                    s.seed = derive_seed(derive_seed(s.seed, SAMPLER_SALT, index as u64), SAMPLER_SALT, k as u64);
                    add_cost(&mut total, cost(inputs.len(), &s));
                    estimate(&b.model, inputs, &s)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((series, total))
}

fn gather(sequences: &[Dataset], feats: &[FeatureSeries], seg: Segment) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (d, f) in sequences.iter().zip(feats) {
        for k in d.indices(seg) {
            rows.push(f.row(k).to_vec());
            y.push(d.post_washout_targets()[k]);
        }
    }
    (rows, y)
}

fn fit_options(cfg: &ExperimentConfig, width: usize) -> Result<FitOptions> {
    let mask = if cfg.masked_features.is_empty() {
        None
    } else {
        if let Some(&i) = cfg.masked_features.iter().find(|&&i| i >= width) {
            return Err(QrcError::config("masked_features", format!("feature {i} of {width}")));
        }
        Some((0..width).map(|i| !cfg.masked_features.contains(&i)).collect())
    };
    Ok(FitOptions { ridge: cfg.ridge, mask })
}

/// Builds reservoirs and datasets, computes features once per reservoir and
/// sequence, and fits one readout per task on the shared features.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate()?;
    let mut warnings = Vec::new();

    let built = cfg
        .reservoirs
        .iter()
        .map(|r| build_reservoir(cfg, r))
        .collect::<Result<Vec<_>>>()?;

    let mut datasets = Vec::new();
    let mut standardization = None;
    for &id in &cfg.tasks {
        let task = make_task(id, cfg.task_dim(id), cfg.seeds.task)?;
        let seqs = build_dataset(&task, cfg.problem, cfg.seeds.task)?;
        if id == TaskId::V {
            standardization = seqs[0].standardization;
        }
        datasets.push((id, seqs));
    }
    let sequences = &datasets[0].1;

    let mut infos = Vec::new();
    let mut feature_sets: Vec<(String, Vec<FeatureSeries>)> = Vec::new();
    for (i, b) in built.iter().enumerate() {
        let sampler = cfg.sampler.resolve(b.model.n_qubits(), cfg.seeds.sampler);
        let (feats, total_cost) = features(b, i, sampler, sequences)?;
        let mut deviation: f64 = 0.0;
        for s in b.model.subsystems() {
            deviation = deviation.max(s.steady_state_deviation()?);
        }
        if deviation > STEADY_STATE_TOL {
            warnings.push(format!(
                "{}: |0…0⟩ is not stationary under u = 1 (deviation {deviation:.3e}); the washout is approximate",
                b.name
            ));
        }
        infos.push(ReservoirInfo {
            name: b.name.clone(),
            n_qubits: b.model.n_qubits(),
            circuit_seed: b.circuit_seed,
            steady_state_deviation: deviation,
            provenance: feats[0].provenance().clone(),
            cost: total_cost,
        });
        feature_sets.push((b.name.clone(), feats));
    }
    if cfg.multiplex && feature_sets.len() >= 2 {
        let name = feature_sets.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join("+");
        let joint = (0..sequences.len())
            .map(|k| multiplex(&feature_sets.iter().map(|(_, f)| f[k].clone()).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        feature_sets.push((name, joint));
    }

    let mut results = Vec::new();
    let mut panels = Vec::new();
    for (name, feats) in &feature_sets {
        let opts = fit_options(cfg, feats[0].width())?;
        let x = {
            let (rows, _) = gather(sequences, feats, Segment::Train);
            DesignMatrix::select(&rows, &(0..rows.len()).collect::<Vec<_>>(), cfg.degree)?
        };
        let targets: Vec<Vec<f64>> = datasets.iter().map(|(_, seqs)| gather(seqs, feats, Segment::Train).1).collect();
        let y = DMatrix::from_fn(x.n_rows(), targets.len(), |r, c| targets[c][r]);
        let models = ols_fit(&x, &y, &opts)?;
        for ((id, seqs), model) in datasets.iter().zip(models) {
            let score = |seg| -> Result<f64> {
                let (rows, y) = gather(seqs, feats, seg);
                let yhat: Vec<f64> = rows.iter().map(|r| model.evaluate(r)).collect();
                nmse(&y, &yhat)
            };
            results.push(TaskResult {
                task: *id,
                reservoir: name.clone(),
                nmse_train: score(Segment::Train)?,
                nmse_test: score(Segment::Test)?,
                weights: model.clone(),
            });
            for (k, (d, f)) in seqs.iter().zip(feats).enumerate() {
                let rows = (0..f.len())
                    .map(|j| PlotRow {
                        l: j as i64 + 1,
                        y_target: d.post_washout_targets()[j],
                        y_pred: model.evaluate(f.row(j)),
                        segment: d.post_washout_segments()[j].name().into(),
                    })
                    .collect();
                panels.push(Panel {
                    reservoir: name.clone(),
                    task: *id,
                    sequence: k,
                    rows,
                });
            }
        }
    }

    Ok(RunReport {
        version: VERSION,
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        reservoirs: infos,
        results,
        standardization,
        warnings,
        panels,
        features: feature_sets,
        datasets,
    })
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '+' || c == '-' { c } else { '_' }).collect()
}

/// One `l,y_target,y_pred,segment` file per task, reservoir and sequence.
pub fn emit_plotdata(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    report
        .panels
        .iter()
        .map(|p| {
            let path = dir.join(format!("plot_{}_task{}_seq{}.csv", file_safe(&p.reservoir), p.task, p.sequence));
            io::write_plot(&path, &p.rows)?;
            Ok(path)
        })
        .collect()
}

/// Writes `report.json`, `nmse.csv`, plot data, features, datasets and
/// weights under `dir`.
pub fn write_artifacts(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
    written.push(path);
    let path = dir.join("nmse.csv");
    io::write_nmse(&path, &report.nmse_rows())?;
    written.push(path);
    written.extend(emit_plotdata(report, dir)?);
    for (name, feats) in &report.features {
        for (k, f) in feats.iter().enumerate() {
            let path = dir.join(format!("features_{}_seq{k}.csv", file_safe(name)));
            io::write_features(&path, f)?;
            written.push(path);
        }
    }
    for (id, seqs) in &report.datasets {
        for (k, d) in seqs.iter().enumerate() {
            let path = dir.join(format!("dataset_task{id}_seq{k}.csv"));
            io::write_dataset(&path, d)?;
            written.push(path);
        }
    }
    for r in &report.results {
        let path = dir.join(format!("weights_{}_task{}.txt", file_safe(&r.reservoir), r.task));
        std::fs::write(&path, write_weights(&r.weights))?;
        written.push(path);
    }
    Ok(written)
}
