//! Target input-output maps and the washout/train/test protocol.
//!
//! Every sequence starts with a constant washout `u = 1` from the zero
//! state. Times are numbered so that the first post-washout sample is
//! `l = 1`; washout samples carry `l ≤ 0`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QrcError, Result};
use crate::random::{seeded, SeededRng};
use crate::sampling::rng::derive_seed;

pub const WASHOUT: usize = 50;
pub const DISCARD: usize = 4;

const TASK_SALT: u64 = 0x7461_736b;
const INPUT_SALT: u64 = 0x696e_7075;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    I,
    II,
    III,
    IV,
    V,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [TaskId::I, TaskId::II, TaskId::III, TaskId::IV, TaskId::V];

    pub fn default_dim(self) -> usize {
        match self {
            TaskId::I | TaskId::II => 200,
            TaskId::III => 70,
            TaskId::IV | TaskId::V => 0,
        }
    }

    /// Dimensions used in the original experiments.
    pub fn full_dim(self) -> usize {
        match self {
            TaskId::I | TaskId::II => 2000,
            TaskId::III => 700,
            TaskId::IV | TaskId::V => 0,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for TaskId {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| QrcError::config("task", format!("unknown task `{s}` (expected I..V)")))
    }
}

/// `y = c0 + a·x + Σ_{i≤j} B_ij x_i x_j`.
#[derive(Clone, Debug)]
pub struct QuadraticReadout {
    pub c0: f64,
    pub a: DVector<f64>,
    /// Upper triangular.
    pub b: DMatrix<f64>,
}

impl QuadraticReadout {
    fn sample(dim: usize, rng: &mut SeededRng) -> Self {
        let c0 = uniform(rng);
        let a = DVector::from_fn(dim, |_, _| uniform(rng));
        let mut b = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                b[(i, j)] = uniform(rng);
            }
        }
        Self { c0, a, b }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.c0 + self.a.dot(x) + x.dot(&(&self.b * x))
    }
}

#[derive(Clone, Debug)]
pub enum TaskKind {
    /// `x_l = A x_{l−1} + c u_l`, `y_l = h(x_l)`.
    Linear {
        a: DMatrix<f64>,
        c: DVector<f64>,
        h: QuadraticReadout,
    },
    /// `x_l = p(u_l) x_{l−1} + q(u_l)`, `y_l = wᵀx_l` with block-diagonal
    /// `A_j = A_j^(1) ⊕ A_j^(2)`.
    Polynomial {
        a: Vec<[DMatrix<f64>; 2]>,
        b: Vec<DVector<f64>>,
        w: DVector<f64>,
    },
    /// Volterra kernels per order `1..=5` over lags `{0,1,2}`; the kernel of
    /// order `i` holds `3^i` coefficients indexed by lag tuples in base 3.
    Volterra { kernels: Vec<Vec<f64>>, w_c: f64 },
    /// Missile pitch dynamics integrated with RK4.
    Missile { substeps: usize },
}

#[derive(Clone, Debug)]
pub struct TargetTask {
    pub id: TaskId,
    pub dim: usize,
    pub seed: u64,
    pub kind: TaskKind,
}

fn uniform(rng: &mut SeededRng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

fn uniform_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| uniform(rng))
}

pub fn sigma_max(a: &DMatrix<f64>) -> f64 {
    a.singular_values().max()
}

fn rescale(a: &mut DMatrix<f64>, target: f64) {
    let s = sigma_max(a);
    if s > 0.0 {
        *a *= target / s;
    }
}

/// Largest singular value targeted for each Task III block.
pub const TASK3_SIGMA: f64 = 0.33;
pub const TASK2_SPARSITY: f64 = 0.95;
pub const MISSILE_TAU: f64 = 1.0 / 80.0;
pub const MISSILE_SUBSTEPS: usize = 16;

/// Samples the parameters of task `id`; `dim` is ignored by Tasks IV and V.
pub fn make_task(id: TaskId, dim: usize, seed: u64) -> Result<TargetTask> {
    if dim == 0 && matches!(id, TaskId::I | TaskId::II | TaskId::III) {
        return Err(QrcError::InputDomain("task dimension must be at least 1".into()));
    }
    let mut rng = seeded(derive_seed(seed, TASK_SALT, id.index()));
    let kind = match id {
        TaskId::I | TaskId::II => {
            let mut a = uniform_matrix(dim, dim, &mut rng);
            let target = if id == TaskId::I {
                0.5
            } else {
                let zeros = (TASK2_SPARSITY * (dim * dim) as f64).round() as usize;
                for k in sample_indices(&mut rng, dim * dim, zeros) {
                    a[(k / dim, k % dim)] = 0.0;
                }
                0.99
            };
            rescale(&mut a, target);
            let c = DVector::from_fn(dim, |_, _| uniform(&mut rng));
            let h = QuadraticReadout::sample(dim, &mut rng);
            TaskKind::Linear { a, c, h }
        }
        TaskId::III => {
            let a = (0..5)
                .map(|_| {
                    let mut blocks = [uniform_matrix(dim, dim, &mut rng), uniform_matrix(dim, dim, &mut rng)];
                    blocks.iter_mut().for_each(|b| rescale(b, TASK3_SIGMA));
                    blocks
                })
                .collect();
            let b = (0..3).map(|_| DVector::from_fn(2 * dim, |_, _| uniform(&mut rng))).collect();
            let w = DVector::from_fn(2 * dim, |_, _| uniform(&mut rng));
            TaskKind::Polynomial { a, b, w }
        }
        TaskId::IV => {
            let kernels = (1..=5u32).map(|i| (0..3usize.pow(i)).map(|_| uniform(&mut rng)).collect()).collect();
            let w_c = uniform(&mut rng);
            TaskKind::Volterra { kernels, w_c }
        }
        TaskId::V => TaskKind::Missile {
            substeps: MISSILE_SUBSTEPS,
        },
    };
    Ok(TargetTask { id, dim, seed, kind })
}

fn block_apply(blocks: &[DMatrix<f64>; 2], x: &DVector<f64>) -> DVector<f64> {
    let d = blocks[0].nrows();
    let top = &blocks[0] * x.rows(0, d);
    let bottom = &blocks[1] * x.rows(d, d);
    DVector::from_iterator(2 * d, top.iter().chain(bottom.iter()).copied())
}

/// Missile vector field.
pub fn missile_rhs(x: [f64; 2], u: f64) -> [f64; 2] {
    let (x1, x2) = (x[0], x[1]);
    let c = x1.cos();
    let p = 5.0 * x1 - 4.0 * x1.powi(3) + x1.powi(5);
    [
        x2 - 0.1 * c * p - 0.5 * c * u,
        -65.0 * x1 + 50.0 * x1.powi(3) - 15.0 * x1.powi(5) - x2 - 100.0 * u,
    ]
}

/// Classical RK4 over one sampling interval with `u` held constant.
pub fn missile_interval(mut x: [f64; 2], u: f64, substeps: usize) -> [f64; 2] {
    let h = MISSILE_TAU / substeps as f64;
    let axpy = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    for _ in 0..substeps {
        let k1 = missile_rhs(x, u);
        let k2 = missile_rhs(axpy(x, k1, h / 2.0), u);
        let k3 = missile_rhs(axpy(x, k2, h / 2.0), u);
        let k4 = missile_rhs(axpy(x, k3, h), u);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

fn volterra_output(kernels: &[Vec<f64>], w_c: f64, lags: [f64; 3]) -> f64 {
    let mut y = w_c;
    let mut products = vec![1.0];
    for kernel in kernels {
        products = products.iter().flat_map(|p| lags.iter().map(move |u| p * u)).collect();
        y += kernel.iter().zip(&products).map(|(w, p)| w * p).sum::<f64>();
    }
    y
}

impl TargetTask {
    /// Outputs for `inputs`, starting from the zero state (and `u = 1` for
    /// the two lags before the first input of Task IV).
    pub fn eval(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        if let Some(&u) = inputs.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(QrcError::InputDomain(format!("input {u} outside [0, 1]")));
        }
        Ok(match &self.kind {
            TaskKind::Linear { a, c, h } => {
                let mut x = DVector::zeros(self.dim);
                inputs
                    .iter()
                    .map(|&u| {
                        x = a * &x + c * u;
                        h.eval(&x)
                    })
                    .collect()
            }
            TaskKind::Polynomial { a, b, w } => {
                let mut x = DVector::zeros(2 * self.dim);
                inputs
                    .iter()
                    .map(|&u| {
                        let mut next = DVector::zeros(2 * self.dim);
                        let mut pow = 1.0;
                        for aj in a {
                            next += block_apply(aj, &x) * pow;
                            pow *= u;
                        }
                        let mut pow = 1.0;
                        for bj in b {
                            next += bj * pow;
                            pow *= u;
                        }
                        x = next;
                        w.dot(&x)
                    })
                    .collect()
            }
            TaskKind::Volterra { kernels, w_c } => {
                let mut padded = vec![1.0, 1.0];
                padded.extend_from_slice(inputs);
                padded
                    .windows(3)
                    .map(|w| volterra_output(kernels, *w_c, [w[2], w[1], w[0]]))
                    .collect()
            }
            TaskKind::Missile { substeps } => {
                let mut x = [0.0, 0.0];
                inputs
                    .iter()
                    .map(|&u| {
                        x = missile_interval(x, u, *substeps);
                        x[1]
                    })
                    .collect()
            }
        })
    }

    /// `‖x_n − x_{n−1}‖_∞` after `n` steps of `u = 1` from the zero state, for
    /// the tasks with a vector state.
    pub fn washout_residual(&self, n: usize) -> Option<f64> {
        let diff = |a: &DVector<f64>, b: &DVector<f64>| (a - b).amax();
        match &self.kind {
            TaskKind::Linear { a, c, .. } => {
                let mut x = DVector::zeros(self.dim);
                let mut prev = x.clone();
                for _ in 0..n {
                    prev = x.clone();
                    x = a * &x + c;
                }
                Some(diff(&x, &prev))
            }
            TaskKind::Polynomial { a, b, .. } => {
                let mut x = DVector::zeros(2 * self.dim);
                let mut prev = x.clone();
                let p_one: Vec<&[DMatrix<f64>; 2]> = a.iter().collect();
                let q_one: DVector<f64> = b.iter().fold(DVector::zeros(2 * self.dim), |acc, v| acc + v);
                for _ in 0..n {
                    prev = x.clone();
                    let mut next = q_one.clone();
                    for aj in &p_one {
                        next += block_apply(aj, &x);
                    }
                    x = next;
                }
                Some(diff(&x, &prev))
            }
            TaskKind::Missile { substeps } => {
                let mut x = [0.0, 0.0];
                let mut prev = x;
                for _ in 0..n {
                    prev = x;
                    x = missile_interval(x, 1.0, *substeps);
                }
                Some((x[0] - prev[0]).abs().max((x[1] - prev[1]).abs()))
            }
            TaskKind::Volterra { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    MultiStep,
    Emulation,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::MultiStep => "multi_step",
            Problem::Emulation => "emulation",
        }
    }
}

impl FromStr for Problem {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi_step" => Ok(Problem::MultiStep),
            "emulation" => Ok(Problem::Emulation),
            _ => Err(QrcError::config("problem", format!("unknown problem `{s}`"))),
        }
    }
}

/// Multi-step prediction: one sequence, train `l = 5..=23`, test `24..=30`.
pub const MULTI_STEP_LEN: usize = 30;
pub const MULTI_STEP_TRAIN_END: usize = 23;
/// Emulation: two training sequences and one test sequence of this length.
pub const EMULATION_LEN: usize = 24;
pub const EMULATION_TRAIN_SEQS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Washout,
    Discard,
    Train,
    Test,
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::Washout => "washout",
            Segment::Discard => "discard",
            Segment::Train => "train",
            Segment::Test => "test",
        }
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Segment::Washout, Segment::Discard, Segment::Train, Segment::Test]
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown segment `{s}`"))
    }
}

/// One input-output sequence including its washout prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub task: TaskId,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub segments: Vec<Segment>,
    pub washout: usize,
    /// `(mean, std)` subtracted from / divided into the raw targets, if any.
    pub standardization: Option<(f64, f64)>,
}

impl Dataset {
    /// Time label of row `k` (washout rows are `≤ 0`).
    pub fn time(&self, k: usize) -> i64 {
        k as i64 - self.washout as i64 + 1
    }

    /// Post-washout inputs, the sequence a reservoir started in `|0…0⟩` sees.
    pub fn post_washout_inputs(&self) -> &[f64] {
        &self.inputs[self.washout..]
    }

    pub fn post_washout_targets(&self) -> &[f64] {
        &self.targets[self.washout..]
    }

    pub fn post_washout_segments(&self) -> &[Segment] {
        &self.segments[self.washout..]
    }

    /// Post-washout indices (0-based) of rows in `seg`.
    pub fn indices(&self, seg: Segment) -> Vec<usize> {
        self.post_washout_segments()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == seg)
            .map(|(k, _)| k)
            .collect()
    }
}

fn sequence(task: &TargetTask, len: usize, last_train: Option<usize>, rng: &mut SeededRng) -> Result<Dataset> {
    let mut inputs = vec![1.0; WASHOUT];
    inputs.extend((0..len).map(|_| rng.random::<f64>()));
    let targets = task.eval(&inputs)?;
    let mut segments = vec![Segment::Washout; WASHOUT];
    segments.extend((1..=len).map(|l| {
        if l <= DISCARD {
            Segment::Discard
        } else if last_train.is_none_or(|end| l <= end) {
            Segment::Train
        } else {
            Segment::Test
        }
    }));
    Ok(Dataset {
        task: task.id,
        inputs,
        targets,
        segments,
        washout: WASHOUT,
        standardization: None,
    })
}

fn set_segment(ds: &mut Dataset, from: Segment, to: Segment) {
    for s in ds.segments.iter_mut().filter(|s| **s == from) {
        *s = to;
    }
}

/// Builds the sequences of a problem: one for multi-step prediction, or
/// `K = 2` training sequences followed by one test sequence for emulation.
/// Task V targets are standardized with the training rows' mean and
/// standard deviation.
pub fn build_dataset(task: &TargetTask, problem: Problem, seed: u64) -> Result<Vec<Dataset>> {
    let mut rng = seeded(derive_seed(seed, INPUT_SALT, problem as u64));
    let mut out = match problem {
        Problem::MultiStep => vec![sequence(task, MULTI_STEP_LEN, Some(MULTI_STEP_TRAIN_END), &mut rng)?],
        Problem::Emulation => {
            let mut seqs = (0..=EMULATION_TRAIN_SEQS)
                .map(|_| sequence(task, EMULATION_LEN, None, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            set_segment(seqs.last_mut().expect("three sequences"), Segment::Train, Segment::Test);
            seqs
        }
    };
    if task.id == TaskId::V {
        let train: Vec<f64> = out
            .iter()
            .flat_map(|d| d.indices(Segment::Train).into_iter().map(|k| d.post_washout_targets()[k]))
            .collect();
        let n = train.len() as f64;
        let mean = train.iter().sum::<f64>() / n;
        let std = (train.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        let std = if std > 0.0 { std } else { 1.0 };
        for d in &mut out {
            d.targets.iter_mut().for_each(|y| *y = (*y - mean) / std);
            d.standardization = Some((mean, std));
        }
    }
    Ok(out)
}
