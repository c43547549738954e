//! Linear readout training, NMSE, and readout-error calibration.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{QrcError, Result};
use crate::qmath::{qubits_for_dim, z_sign};
use crate::reservoir::{expand_row, monomial_label, monomials, ReadoutModel};

/// Training design matrix: expanded feature monomials plus a trailing column
/// of ones.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    n_vars: usize,
    degree: usize,
}

impl DesignMatrix {
    pub fn new<'a>(rows: impl IntoIterator<Item = &'a [f64]>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(QrcError::contract("readout degree must be at least 1"));
        }
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n_vars = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() {
            return Err(QrcError::contract("design matrix needs at least one row"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n_vars) {
            return Err(QrcError::dim(format!("ragged feature rows: {} vs {n_vars}", r.len())));
        }
        let width = monomials(n_vars, degree).len() + 1;
        let mut matrix = DMatrix::zeros(rows.len(), width);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in expand_row(r, degree).into_iter().enumerate() {
                matrix[(i, j)] = v;
            }
            matrix[(i, width - 1)] = 1.0;
        }
        Ok(Self { matrix, n_vars, degree })
    }

    /// Rows `indices` of a feature table.
    pub fn select(rows: &[Vec<f64>], indices: &[usize], degree: usize) -> Result<Self> {
        if let Some(&k) = indices.iter().find(|&&k| k >= rows.len()) {
            return Err(QrcError::dim(format!("row {k} of {}", rows.len())));
        }
        Self::new(indices.iter().map(|&k| rows[k].as_slice()), degree)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitOptions {
    /// Ridge penalty on the non-constant weights; 0 is plain least squares.
    pub ridge: f64,
    /// `false` entries force the corresponding monomial weight to zero.
    pub mask: Option<Vec<bool>>,
}

impl FitOptions {
    pub fn ridge(lambda: f64) -> Self {
        Self { ridge: lambda, mask: None }
    }
}

/// Minimum-norm least-squares solution of `a w = b` through the SVD, with
/// singular values below `max(m, n)·ε·σ_max` treated as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    svd.solve(b, tol).expect("both factors computed")
}

/// Least-squares readouts, one per target column of `y`.
pub fn ols_fit(x: &DesignMatrix, y: &DMatrix<f64>, opts: &FitOptions) -> Result<Vec<ReadoutModel>> {
    if y.nrows() != x.n_rows() {
        return Err(QrcError::dim(format!("{} design rows vs {} targets", x.n_rows(), y.nrows())));
    }
    if opts.ridge < 0.0 || !opts.ridge.is_finite() {
        return Err(QrcError::InputDomain(format!("ridge λ = {}", opts.ridge)));
    }
    let n_mono = x.n_cols() - 1;
    let keep: Vec<usize> = match &opts.mask {
        Some(m) if m.len() != n_mono => {
            return Err(QrcError::dim(format!("mask of {} for {n_mono} monomials", m.len())));
        }
        Some(m) => (0..n_mono).filter(|&j| m[j]).chain([n_mono]).collect(),
        None => (0..=n_mono).collect(),
    };
    let sub = x.matrix.select_columns(&keep);
    let (a, b) = if opts.ridge > 0.0 {
        let k = keep.len();
        let mut a = DMatrix::zeros(sub.nrows() + k - 1, k);
        a.rows_mut(0, sub.nrows()).copy_from(&sub);
        let mut b = DMatrix::zeros(a.nrows(), y.ncols());
        b.rows_mut(0, y.nrows()).copy_from(y);
        for j in 0..k - 1 {
            a[(sub.nrows() + j, j)] = opts.ridge.sqrt();
        }
        (a, b)
    } else {
        (sub, y.clone())
    };
    let w = lstsq(&a, &b);
    (0..y.ncols())
        .map(|t| {
            let mut full = vec![0.0; n_mono];
            for (r, &j) in keep[..keep.len() - 1].iter().enumerate() {
                full[j] = w[(r, t)];
            }
            ReadoutModel::new(x.degree, x.n_vars, full, w[(keep.len() - 1, t)])
        })
        .collect()
}

pub fn ols_fit_single(x: &DesignMatrix, y: &[f64], opts: &FitOptions) -> Result<ReadoutModel> {
    let y = DMatrix::from_column_slice(y.len(), 1, y);
    Ok(ols_fit(x, &y, opts)?.remove(0))
}

pub fn predict(model: &ReadoutModel, rows: &[Vec<f64>], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&k| model.evaluate(&rows[k])).collect()
}

/// `Σ(y − ŷ)² / Σ(y − ȳ)²`.
pub fn nmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(QrcError::dim(format!("{} targets vs {} predictions", y.len(), yhat.len())));
    }
    if y.len() < 2 {
        return Err(QrcError::UndefinedMetric("NMSE needs at least two samples".into()));
    }
    let mu = y.iter().sum::<f64>() / y.len() as f64;
    let spread: f64 = y.iter().map(|v| (v - mu).powi(2)).sum();
    if spread == 0.0 {
        return Err(QrcError::UndefinedMetric("constant targets".into()));
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sse / spread)
}

/// `A[i][j] = Pr(read i | prepared j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationMatrix {
    a: DMatrix<f64>,
    n_qubits: usize,
}

pub const TAU_STOCHASTIC: f64 = 1e-9;

impl CalibrationMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(QrcError::dim("calibration matrix must be square"));
        }
        let n_qubits = qubits_for_dim(a.nrows())
            .ok_or_else(|| QrcError::dim(format!("calibration dimension {} is not 2^n", a.nrows())))?;
        if a.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(QrcError::contract("calibration entries must lie in [0, 1]"));
        }
        for (j, col) in a.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > TAU_STOCHASTIC {
                return Err(QrcError::contract(format!("calibration column {j} sums to {s}")));
            }
        }
        Ok(Self { a, n_qubits })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            a: DMatrix::identity(1 << n, 1 << n),
            n_qubits: n,
        }
    }

    /// Independent symmetric flips with probability `p` on every qubit.
    pub fn bit_flip(n: usize, p: f64) -> Result<Self> {
        let one = DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p]);
        Self::product(&vec![one; n])
    }

    /// `A_0 ⊗ A_1 ⊗ …` from per-qubit 2×2 confusion matrices.
    pub fn product(factors: &[DMatrix<f64>]) -> Result<Self> {
        Self::new(factors.iter().fold(DMatrix::identity(1, 1), |acc, f| acc.kronecker(f)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        lstsq(&self.a, &DMatrix::identity(self.a.nrows(), self.a.nrows()))
    }

    /// Noisy count distribution for a true one.
    pub fn forward(&self, counts: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(counts)).iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedCounts {
    pub counts: Vec<Vec<f64>>,
    /// Some `A_l` was singular to tolerance; its pseudo-inverse was used.
    pub rank_deficient: bool,
}

/// `counts_l ← A_l⁺ counts_l`; one matrix for all rows or one per row.
pub fn apply_calibration(counts: &[Vec<f64>], a: &[CalibrationMatrix]) -> Result<CorrectedCounts> {
    if a.len() != 1 && a.len() != counts.len() {
        return Err(QrcError::dim(format!("{} calibration matrices for {} rows", a.len(), counts.len())));
    }
    if counts.iter().flatten().any(|&c| c < 0.0) {
        return Err(QrcError::InputDomain("negative counts".into()));
    }
    let mut rank_deficient = false;
    let pinvs: Vec<DMatrix<f64>> = a
        .iter()
        .map(|m| {
            let sv = m.a.singular_values();
            rank_deficient |= sv.min() <= m.a.nrows() as f64 * f64::EPSILON * sv.max();
            m.pseudo_inverse()
        })
        .collect();
    let counts = counts
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let p = &pinvs[if pinvs.len() == 1 { 0 } else { l }];
            if c.len() != p.ncols() {
                return Err(QrcError::dim(format!("{} outcomes vs calibration {}", c.len(), p.ncols())));
            }
            Ok((p * DVector::from_column_slice(c)).iter().copied().collect())
        })
        .collect::<Result<_>>()?;
    Ok(CorrectedCounts { counts, rank_deficient })
}

/// Map from a count vector over `2^n` outcomes to regression features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMap {
    /// Outcome frequencies, the last outcome dropped (it is fixed by the
    /// others and the constant column).
    Counts,
    /// `⟨Z^(i)⟩ = Σ_b (±1 per bit i of b)·counts[b] / total`.
    PauliZ,
}

impl FeatureMap {
    pub fn apply(self, counts: &[f64]) -> Result<Vec<f64>> {
        let n = qubits_for_dim(counts.len()).ok_or_else(|| QrcError::dim("count vector length is not 2^n"))?;
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(QrcError::InputDomain("count vector with zero total".into()));
        }
        Ok(match self {
            FeatureMap::Counts => counts[..counts.len() - 1].iter().map(|c| c / total).collect(),
            FeatureMap::PauliZ => (0..n)
                .map(|i| counts.iter().enumerate().map(|(b, c)| z_sign(b, i, n) * c).sum::<f64>() / total)
                .collect(),
        })
    }

    pub fn apply_all(self, counts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        counts.iter().map(|c| self.apply(c)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub max_abs_diff: f64,
    /// All rows shared one calibration matrix; only then is invariance
    /// expected.
    pub time_invariant: bool,
}

/// Trains the degree-1 readout on raw and on calibration-corrected features
/// and compares the predictions on `test` rows.
pub fn verify_readout_invariance(
    counts: &[Vec<f64>],
    a: &[CalibrationMatrix],
    y: &[f64],
    train: &[usize],
    test: &[usize],
    map: FeatureMap,
) -> Result<InvarianceReport> {
    let time_invariant = a.windows(2).all(|w| w[0] == w[1]);
    let corrected = apply_calibration(counts, a)?.counts;
    let fit_predict = |rows: &[Vec<f64>]| -> Result<Vec<f64>> {
        let x = DesignMatrix::select(rows, train, 1)?;
        let targets: Vec<f64> = train.iter().map(|&k| y[k]).collect();
        let model = ols_fit_single(&x, &targets, &FitOptions::default())?;
        Ok(predict(&model, rows, test))
    };
    let raw = fit_predict(&map.apply_all(counts)?)?;
    let fixed = fit_predict(&map.apply_all(&corrected)?)?;
    let max_abs_diff = raw.iter().zip(&fixed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(InvarianceReport {
        max_abs_diff,
        time_invariant,
    })
}

/// Plain-text weights: a header, then one `label weight` line per monomial
/// with the constant term labelled `1` first.
pub fn write_weights(model: &ReadoutModel) -> String {
    let mut s = format!("# degree {} n_vars {}\n", model.degree, model.n_vars);
    writeln!(s, "1 {:e}", model.bias).unwrap();
    for (m, w) in monomials(model.n_vars, model.degree).iter().zip(&model.weights) {
        writeln!(s, "{} {:e}", monomial_label(m), w).unwrap();
    }
    s
}

pub fn parse_weights(text: &str) -> Result<ReadoutModel> {
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, msg: &str| QrcError::Parse { line: line + 1, msg: msg.into() };
    let (_, header) = lines.next().ok_or_else(|| parse_err(0, "empty weights file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (degree, n_vars) = match fields.as_slice() {
        ["#", "degree", d, "n_vars", n] => (
            d.parse().map_err(|_| parse_err(0, "bad degree"))?,
            n.parse().map_err(|_| parse_err(0, "bad n_vars"))?,
        ),
        _ => return Err(parse_err(0, "expected `# degree R n_vars n`")),
    };
    let expected = monomials(n_vars, degree);
    let mut bias = None;
    let mut weights = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let (label, value) = line.split_once(' ').ok_or_else(|| parse_err(i, "expected `label weight`"))?;
        let value: f64 = value.trim().parse().map_err(|_| parse_err(i, "bad weight"))?;
        if bias.is_none() {
            if label != "1" {
                return Err(parse_err(i, "first entry must be the constant `1`"));
            }
            bias = Some(value);
            continue;
        }
        match expected.get(weights.len()) {
            Some(m) if monomial_label(m) == label => weights.push(value),
            _ => return Err(parse_err(i, &format!("unexpected monomial `{label}`"))),
        }
    }
    ReadoutModel::new(degree, n_vars, weights, bias.ok_or_else(|| parse_err(1, "missing constant term"))?)
}
