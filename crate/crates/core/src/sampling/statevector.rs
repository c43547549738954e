use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuits::Circuit;
use crate::error::{QrcError, Result};
use crate::qmath::{z_sign, C64, ONE, ZERO};

/// Pure state on `n` qubits, qubit 0 the most significant index bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = crate::qmath::qubits_for_dim(amps.len())
            .ok_or_else(|| QrcError::dim(format!("{} amplitudes is not 2^n", amps.len())))?;
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(QrcError::contract(format!("state vector norm² = {norm}")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn basis(n: usize, b: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[b] = ONE;
        Self { n_qubits: n, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn apply(&mut self, c: &Circuit) {
        c.apply(&mut self.amps);
    }

    pub fn set_basis(&mut self, b: usize) {
        self.amps.iter_mut().for_each(|z| *z = ZERO);
        self.amps[b] = ONE;
    }

    pub fn assign(&mut self, other: &Statevector) {
        self.amps.copy_from_slice(&other.amps);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn expect_z(&self, i: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(b, z)| z_sign(b, i, self.n_qubits) * z.norm_sqr())
            .sum()
    }

    /// Projective Z measurement of every qubit: returns the outcome and
    /// collapses onto it.
    pub fn measure_all(&mut self, rng: &mut impl Rng) -> usize {
        let b = sample_index(&self.probabilities(), rng.random());
        self.set_basis(b);
        b
    }
}

/// Smallest index whose cumulative probability exceeds `x`; the last index
/// with nonzero weight absorbs rounding.
pub fn sample_index(probs: &[f64], x: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (b, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = b;
            acc += p;
            if x < acc {
                return b;
            }
        }
    }
    last
}

/// Per-shot categorical draws below this shot count, conditional binomials
/// above.
const CATEGORICAL_LIMIT: u64 = 16;

/// Adds a multinomial draw of `shots` outcomes into `counts`.
pub fn sample_counts(probs: &[f64], shots: u64, rng: &mut impl Rng, counts: &mut [u64]) {
    if shots <= CATEGORICAL_LIMIT {
        for _ in 0..shots {
            counts[sample_index(probs, rng.random())] += 1;
        }
        return;
    }
    let mut remaining = shots;
    let mut mass = 1.0;
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (b, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == last {
            counts[b] += remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("q in [0, 1]").sample(rng);
        counts[b] += k;
        remaining -= k;
        mass -= p;
    }
}
