use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuits::Preset;
use crate::error::{QrcError, Result};
use crate::sampling::{SamplerConfig, Scheme};
use crate::tasks::{Problem, TaskId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReservoirSpec {
    Preset(String),
    File { file: PathBuf },
}

impl ReservoirSpec {
    pub fn label(&self) -> String {
        match self {
            ReservoirSpec::Preset(name) => name.clone(),
            ReservoirSpec::File { file } => file
                .file_stem()
                .map_or_else(|| "custom".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactTag {
    Exact,
}

/// Sampler settings; unset counts fall back to the reservoir defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledSpec {
    #[serde(default)]
    pub n_m: Option<usize>,
    #[serde(default)]
    pub shots: Option<usize>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default = "yes")]
    pub parallel: bool,
}

impl Default for SampledSpec {
    fn default() -> Self {
        Self {
            n_m: None,
            shots: None,
            scheme: Scheme::Scheme1,
            window: None,
            parallel: true,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Scheme1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplerSpec {
    Exact(ExactTag),
    Sampled(SampledSpec),
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec::Sampled(SampledSpec::default())
    }
}

pub const DEFAULT_N_M: usize = 1024;

/// Shots per trajectory by device family.
pub fn default_shots(n_qubits: usize) -> usize {
    if n_qubits == 5 {
        8192
    } else {
        1024
    }
}

impl SamplerSpec {
    /// Concrete sampler for a reservoir of `n_qubits`, or `None` for exact
    /// features.
    pub fn resolve(&self, n_qubits: usize, seed: u64) -> Option<SamplerConfig> {
        match self {
            SamplerSpec::Exact(_) => None,
            SamplerSpec::Sampled(s) => Some(SamplerConfig {
                n_m: s.n_m.unwrap_or(DEFAULT_N_M),
                shots: s.shots.unwrap_or_else(|| default_shots(n_qubits)),
                scheme: s.scheme,
                window: s.window,
                seed,
                parallel: s.parallel,
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub circuit: u64,
    #[serde(default)]
    pub task: u64,
    #[serde(default)]
    pub sampler: u64,
}

/// Per-qubit noise applied after each circuit and to `σ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub depolarizing: f64,
    #[serde(default)]
    pub amplitude_damping: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_reservoirs")]
    pub reservoirs: Vec<ReservoirSpec>,
    #[serde(default = "default_problem")]
    pub problem: Problem,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<TaskId>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub sampler: SamplerSpec,
    /// Use the full task dimensions instead of the desk-scale defaults.
    #[serde(default)]
    pub full_dims: bool,
    /// Per-task dimension overrides (Tasks I–III).
    #[serde(default)]
    pub dims: BTreeMap<TaskId, usize>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "one")]
    pub degree: usize,
    #[serde(default)]
    pub ridge: f64,
    /// Feature columns whose weights are fixed at zero.
    #[serde(default)]
    pub masked_features: Vec<usize>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    /// With two or more reservoirs, also fit on their concatenated features.
    #[serde(default = "yes")]
    pub multiplex: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_reservoirs() -> Vec<ReservoirSpec> {
    vec![ReservoirSpec::Preset("vigo5".into())]
}

fn default_problem() -> Problem {
    Problem::MultiStep
}

fn default_tasks() -> Vec<TaskId> {
    TaskId::ALL.to_vec()
}

fn default_eps() -> f64 {
    0.1
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("qrc_out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Largest register for which per-qubit noise wrapping is accepted.
pub const MAX_NOISE_QUBITS: usize = 6;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QrcError::config("config", e.to_string()))
    }

    /// Reads a config file; relative reservoir files resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QrcError::config("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for r in &mut cfg.reservoirs {
            if let ReservoirSpec::File { file } = r {
                if file.is_relative() {
                    *file = base.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn task_dim(&self, id: TaskId) -> usize {
        self.dims
            .get(&id)
            .copied()
            .unwrap_or(if self.full_dims { id.full_dim() } else { id.default_dim() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.reservoirs.is_empty() {
            return Err(QrcError::config("reservoirs", "at least one reservoir is required"));
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            match r {
                ReservoirSpec::Preset(name) => {
                    name.parse::<Preset>()
                        .map_err(|_| QrcError::config(format!("reservoirs[{i}]"), format!("unknown preset `{name}`")))?;
                }
                ReservoirSpec::File { file } if !file.is_file() => {
                    return Err(QrcError::config(
                        format!("reservoirs[{i}].file"),
                        format!("{} does not exist", file.display()),
                    ));
                }
                ReservoirSpec::File { .. } => {}
            }
        }
        if self.tasks.is_empty() {
            return Err(QrcError::config("tasks", "at least one task is required"));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(QrcError::config("eps", format!("{} outside (0, 1]", self.eps)));
        }
        if let Some((&id, _)) = self.dims.iter().find(|(_, &d)| d == 0) {
            return Err(QrcError::config(format!("dims.{id}"), "must be at least 1"));
        }
        if self.degree == 0 {
            return Err(QrcError::config("degree", "must be at least 1"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(QrcError::config("ridge", "must be a finite value ≥ 0"));
        }
        if let Some(n) = &self.noise {
            for (field, p) in [("noise.depolarizing", n.depolarizing), ("noise.amplitude_damping", n.amplitude_damping)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(QrcError::config(field, format!("{p} outside [0, 1]")));
                }
            }
            if matches!(self.sampler, SamplerSpec::Sampled(_)) {
                return Err(QrcError::config("noise", "noisy reservoirs need `\"sampler\": \"exact\"`"));
            }
        }
        if let SamplerSpec::Sampled(s) = &self.sampler {
            let probe = SamplerConfig {
                n_m: s.n_m.unwrap_or(1),
                shots: s.shots.unwrap_or(1),
                scheme: s.scheme,
                window: s.window,
                seed: 0,
                parallel: s.parallel,
            };
            probe.validate()?;
        }
        if self.degree > 1 && !self.masked_features.is_empty() {
            return Err(QrcError::config("masked_features", "masking applies to degree-1 readouts only"));
        }
        Ok(())
    }

    /// Overrides every seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = Seeds {
            circuit: seed,
            task: seed,
            sampler: seed,
        };
        self
    }
}
