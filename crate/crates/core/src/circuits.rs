//! Gate set, reservoir circuit builders and the line-oriented circuit format.
//!
//! Gates in a [`Circuit`] are stored in time order: the first gate acts
//! first. A written operator product `A B C` therefore becomes the gate list
//! `[C, B, A]`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QrcError, Result};
use crate::qmath::{qubit_bit, ComplexMatrix, C64, I, ONE, ZERO};
use crate::random::seeded;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    /// `U3(θ, φ, λ)` on qubit `q`.
    U3 { q: usize, theta: f64, phi: f64, lambda: f64 },
    Rx { q: usize, angle: f64 },
    Ry { q: usize, angle: f64 },
    Cx { control: usize, target: usize },
}

impl Gate {
    pub fn u3(q: usize, [theta, phi, lambda]: [f64; 3]) -> Self {
        Gate::U3 { q, theta, phi, lambda }
    }

    /// `U3(θ)† = U3(−θ⁰, −θ², −θ¹)`.
    pub fn u3_dagger(q: usize, [theta, phi, lambda]: [f64; 3]) -> Self {
        Gate::U3 {
            q,
            theta: -theta,
            phi: -lambda,
            lambda: -phi,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::U3 { q, .. } | Gate::Rx { q, .. } | Gate::Ry { q, .. } => vec![q],
            Gate::Cx { control, target } => vec![control, target],
        }
    }

    fn angles(&self) -> Vec<f64> {
        match *self {
            Gate::U3 { theta, phi, lambda, .. } => vec![theta, phi, lambda],
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } => vec![angle],
            Gate::Cx { .. } => vec![],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n {
                return Err(QrcError::IndexOutOfRange { index: q, len: n });
            }
        }
        if let Gate::Cx { control, target } = *self {
            if control == target {
                return Err(QrcError::contract(format!("CX with control = target = {control}")));
            }
        }
        if self.angles().iter().any(|a| !a.is_finite()) {
            return Err(QrcError::InputDomain("gate angle is not finite".into()));
        }
        Ok(())
    }

    /// Single-qubit 2×2 block, `None` for CX.
    fn single_block(&self) -> Option<[[C64; 2]; 2]> {
        match *self {
            Gate::U3 { theta, phi, lambda, .. } => {
                let (s, c) = (theta / 2.0).sin_cos();
                Some([
                    [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
                    [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
                ])
            }
            Gate::Rx { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some([[C64::new(c, 0.0), -I * s], [-I * s, C64::new(c, 0.0)]])
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some([[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]])
            }
            Gate::Cx { .. } => None,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::U3 { q, theta, phi, lambda } => write!(f, "U3 {q} {theta:?} {phi:?} {lambda:?}"),
            Gate::Rx { q, angle } => write!(f, "RX {q} {angle:?}"),
            Gate::Ry { q, angle } => write!(f, "RY {q} {angle:?}"),
            Gate::Cx { control, target } => write!(f, "CX {control} {target}"),
        }
    }
}

impl FromStr for Gate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let tok: Vec<&str> = s.split_whitespace().collect();
        let idx = |i: usize| -> std::result::Result<usize, String> {
            tok.get(i)
                .ok_or_else(|| format!("missing operand {i}"))?
                .parse()
                .map_err(|e| format!("bad qubit index: {e}"))
        };
        let ang = |i: usize| -> std::result::Result<f64, String> {
            tok.get(i)
                .ok_or_else(|| format!("missing angle {i}"))?
                .parse()
                .map_err(|e| format!("bad angle: {e}"))
        };
        let (gate, arity) = match tok.first().map(|t| t.to_ascii_uppercase()).as_deref() {
            Some("U3") => (
                Gate::U3 { q: idx(1)?, theta: ang(2)?, phi: ang(3)?, lambda: ang(4)? },
                5,
            ),
            Some("RX") => (Gate::Rx { q: idx(1)?, angle: ang(2)? }, 3),
            Some("RY") => (Gate::Ry { q: idx(1)?, angle: ang(2)? }, 3),
            Some("CX") => (Gate::Cx { control: idx(1)?, target: idx(2)? }, 3),
            Some(other) => return Err(format!("unknown gate `{other}`")),
            None => return Err("empty gate line".into()),
        };
        if tok.len() != arity {
            return Err(format!("expected {} operands, found {}", arity - 1, tok.len() - 1));
        }
        Ok(gate)
    }
}

/// Matrix of a gate on its own operands: 2×2 for rotations, 4×4 for CX with
/// the control as the left factor.
pub fn gate_matrix(g: &Gate) -> ComplexMatrix {
    match g.single_block() {
        Some(b) => ComplexMatrix::from_rows(&[&b[0], &b[1]]),
        None => ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]),
    }
}

/// Applies one gate in place to an `n`-qubit state vector.
pub fn apply_gate(g: &Gate, psi: &mut [C64], n: usize) {
    apply_gate_rows(g, psi, n, 1);
}

/// Left-multiplies a row-major `2^n × width` block by the gate, treating each
/// row as one amplitude.
pub fn apply_gate_rows(g: &Gate, data: &mut [C64], n: usize, width: usize) {
    let dim = data.len() / width;
    match g.single_block() {
        Some(m) => {
            let (Gate::U3 { q, .. } | Gate::Rx { q, .. } | Gate::Ry { q, .. }) = *g else {
                unreachable!()
            };
            let mask = 1usize << (n - 1 - q);
            for b in (0..dim).filter(|b| b & mask == 0) {
                let (lo, hi) = data.split_at_mut((b | mask) * width);
                let r0 = &mut lo[b * width..(b + 1) * width];
                let r1 = &mut hi[..width];
                for (x, y) in r0.iter_mut().zip(r1.iter_mut()) {
                    let (a0, a1) = (*x, *y);
                    *x = m[0][0] * a0 + m[0][1] * a1;
                    *y = m[1][0] * a0 + m[1][1] * a1;
                }
            }
        }
        None => {
            let Gate::Cx { control, target } = *g else { unreachable!() };
            let cmask = 1usize << (n - 1 - control);
            let tmask = 1usize << (n - 1 - target);
            for b in (0..dim).filter(|b| b & cmask != 0 && b & tmask == 0) {
                let (lo, hi) = data.split_at_mut((b | tmask) * width);
                lo[b * width..(b + 1) * width].swap_with_slice(&mut hi[..width]);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(QrcError::dim("a circuit needs at least one qubit"));
        }
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Propagates a state vector through every gate.
    pub fn apply(&self, psi: &mut [C64]) {
        for g in &self.gates {
            apply_gate(g, psi, self.n_qubits);
        }
    }

    /// `U X U†` gate by gate, without forming `U`.
    pub fn conjugate(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let d = 1usize << self.n_qubits;
        assert_eq!((x.rows(), x.cols()), (d, d), "operator does not match circuit width");
        let mut a = x.clone();
        for g in &self.gates {
            apply_gate_rows(g, a.data_mut(), self.n_qubits, d);
        }
        let mut b = a.adjoint();
        for g in &self.gates {
            apply_gate_rows(g, b.data_mut(), self.n_qubits, d);
        }
        b.adjoint()
    }

    /// One gate per line.
    pub fn to_text(&self) -> String {
        self.gates.iter().map(|g| format!("{g}\n")).collect()
    }

    /// Parses the output of [`Circuit::to_text`]; blank lines and `#` comments
    /// are skipped. `first_line` offsets reported line numbers.
    pub fn parse(n_qubits: usize, text: &str, first_line: usize) -> Result<Self> {
        let mut gates = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_no = first_line + k;
            let g: Gate = line.parse().map_err(|msg| QrcError::Parse { line: line_no, msg })?;
            g.validate(n_qubits).map_err(|e| QrcError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            gates.push(g);
        }
        Ok(Self { n_qubits, gates })
    }
}

/// Full `2^n × 2^n` unitary of a circuit, column by column.
pub fn circuit_unitary(c: &Circuit) -> ComplexMatrix {
    let d = 1usize << c.n_qubits;
    let mut u = ComplexMatrix::zeros(d, d);
    let mut col = vec![ZERO; d];
    for b in 0..d {
        col.iter_mut().for_each(|z| *z = ZERO);
        col[b] = ONE;
        c.apply(&mut col);
        for (r, &z) in col.iter().enumerate() {
            u[(r, b)] = z;
        }
    }
    u
}

/// `1 − |⟨0…0| U |0…0⟩|²`; zero when the circuit fixes the all-zeros state up
/// to a global phase.
pub fn zero_state_deviation(c: &Circuit) -> f64 {
    let mut psi = vec![ZERO; 1 << c.n_qubits];
    psi[0] = ONE;
    c.apply(&mut psi);
    (1.0 - psi[0].norm_sqr()).max(0.0)
}

/// Random angles for one circuit pair, each uniform in `[−2π, 2π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub seed: u64,
    /// One triple per `U0` layer.
    pub theta: Vec<[f64; 3]>,
    /// Triples for `U1`, row-major over (layer, qubit).
    pub phi: Vec<[f64; 3]>,
}

impl GateParams {
    pub fn sample(seed: u64, theta_count: usize, phi_count: usize) -> Self {
        let mut rng = seeded(seed);
        let mut triple = || -> [f64; 3] { std::array::from_fn(|_| rng.random_range(-2.0 * PI..=2.0 * PI)) };
        let theta = (0..theta_count).map(|_| triple()).collect();
        let phi = (0..phi_count).map(|_| triple()).collect();
        Self { seed, theta, phi }
    }

    pub fn zeros(theta_count: usize, phi_count: usize) -> Self {
        Self {
            seed: 0,
            theta: vec![[0.0; 3]; theta_count],
            phi: vec![[0.0; 3]; phi_count],
        }
    }
}

fn check_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<()> {
    for &(c, t) in pairs {
        Gate::Cx { control: c, target: t }.validate(n)?;
    }
    Ok(())
}

fn short(what: &str, need: usize, have: usize) -> QrcError {
    QrcError::contract(format!("{what}: need {need} entries, have {have}"))
}

/// `U0 = ∏_{j=1}^{N0} U3(θ_j) CX_j U3(θ_j)†` and
/// `U1 = ⊗_i U3(φ_{0,i}) ∏_{j=1}^{N1} (⊗_i U3(φ_{j,i}) CX_j)`, products read
/// left to right as written. `params.phi` holds `(N1 + 1)·n` triples, layer 0
/// first.
pub fn build_boeblingen_pair(
    n: usize,
    n0: usize,
    n1: usize,
    params: &GateParams,
    u0_pairs: &[(usize, usize)],
    u1_pairs: &[(usize, usize)],
) -> Result<(Circuit, Circuit)> {
    if n < 2 {
        return Err(QrcError::dim("Boeblingen-style circuits need at least 2 qubits"));
    }
    if u0_pairs.len() < n0 {
        return Err(short("U0 pair list", n0, u0_pairs.len()));
    }
    if u1_pairs.len() < n1 {
        return Err(short("U1 pair list", n1, u1_pairs.len()));
    }
    if params.theta.len() < n0 {
        return Err(short("theta", n0, params.theta.len()));
    }
    if params.phi.len() < (n1 + 1) * n {
        return Err(short("phi", (n1 + 1) * n, params.phi.len()));
    }
    check_pairs(n, &u0_pairs[..n0])?;
    check_pairs(n, &u1_pairs[..n1])?;

    let mut g0 = Vec::with_capacity(3 * n0);
    for j in (0..n0).rev() {
        let (c, t) = u0_pairs[j];
        let th = params.theta[j];
        g0.push(Gate::u3_dagger(t, th));
        g0.push(Gate::Cx { control: c, target: t });
        g0.push(Gate::u3(t, th));
    }

    let rotations = |layer: usize| (0..n).map(move |i| (i, layer * n + i));
    let mut g1 = Vec::with_capacity(n + n1 * (n + 1));
    for j in (1..=n1).rev() {
        let (c, t) = u1_pairs[j - 1];
        g1.push(Gate::Cx { control: c, target: t });
        g1.extend(rotations(j).map(|(i, k)| Gate::u3(i, params.phi[k])));
    }
    g1.extend(rotations(0).map(|(i, k)| Gate::u3(i, params.phi[k])));

    Ok((Circuit::new(n, g0)?, Circuit::new(n, g1)?))
}

/// `U0 = ∏ CX_j` over `pairs`, `U1 = ⊗_i U3(φ_i)`.
pub fn build_ourense_pair(n: usize, params: &GateParams, pairs: &[(usize, usize)]) -> Result<(Circuit, Circuit)> {
    if params.phi.len() < n {
        return Err(short("phi", n, params.phi.len()));
    }
    check_pairs(n, pairs)?;
    let g0 = pairs.iter().rev().map(|&(c, t)| Gate::Cx { control: c, target: t }).collect();
    let g1 = (0..n).map(|i| Gate::u3(i, params.phi[i])).collect();
    Ok((Circuit::new(n, g0)?, Circuit::new(n, g1)?))
}

/// `U0 = ∏_j Ry(θ_j) CX_j Ry(θ_j)†`, `U1 = ⊗_i Rx(φ_i)`. Only the first
/// component of each parameter triple is used.
pub fn build_vigo_pair(n: usize, params: &GateParams, pairs: &[(usize, usize)]) -> Result<(Circuit, Circuit)> {
    if params.theta.len() < pairs.len() {
        return Err(short("theta", pairs.len(), params.theta.len()));
    }
    if params.phi.len() < n {
        return Err(short("phi", n, params.phi.len()));
    }
    check_pairs(n, pairs)?;
    let mut g0 = Vec::with_capacity(3 * pairs.len());
    for (j, &(c, t)) in pairs.iter().enumerate().rev() {
        let a = params.theta[j][0];
        g0.push(Gate::Ry { q: t, angle: -a });
        g0.push(Gate::Cx { control: c, target: t });
        g0.push(Gate::Ry { q: t, angle: a });
    }
    let g1 = (0..n).map(|i| Gate::Rx { q: i, angle: params.phi[i][0] }).collect();
    Ok((Circuit::new(n, g0)?, Circuit::new(n, g1)?))
}

/// Nearest-neighbour chain `(0,1), (1,2), …`, cycled to `len` entries.
pub fn linear_chain(n: usize, len: usize) -> Vec<(usize, usize)> {
    (0..len).map(|j| (j % (n - 1), j % (n - 1) + 1)).collect()
}

/// Control/target pairs in the order the CX gates act.
pub type CxPairs = Vec<(usize, usize)>;

/// Named circuit pairs laid out on the device coupling graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Boeblingen4,
    Boeblingen10,
    Ourense5,
    Vigo5,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Boeblingen4, Preset::Boeblingen10, Preset::Ourense5, Preset::Vigo5];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Boeblingen4 => "boeblingen4",
            Preset::Boeblingen10 => "boeblingen10",
            Preset::Ourense5 => "ourense5",
            Preset::Vigo5 => "vigo5",
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            Preset::Boeblingen4 => 4,
            Preset::Boeblingen10 => 10,
            Preset::Ourense5 | Preset::Vigo5 => 5,
        }
    }

    /// CX pairs of `U0` and `U1` in local qubit labels.
    pub fn pairs(self) -> (CxPairs, CxPairs) {
        match self {
            Preset::Boeblingen4 => (
                vec![(0, 1), (1, 2), (2, 3), (0, 1), (1, 2)],
                vec![(2, 3), (1, 2), (0, 1), (2, 3), (1, 2)],
            ),
            // local 0..9 = device Q0,1,2,3,5,6,7,8,10,12
            Preset::Boeblingen10 => (
                vec![(0, 1), (2, 3), (4, 8), (5, 6), (6, 9)],
                vec![(1, 2), (3, 7), (1, 5), (4, 5), (6, 7)],
            ),
            Preset::Ourense5 => (vec![(0, 1), (1, 2), (1, 3), (3, 4)], vec![]),
            Preset::Vigo5 => (vec![(0, 1), (1, 2), (3, 4)], vec![]),
        }
    }

    pub fn sample_params(self, seed: u64) -> GateParams {
        let n = self.n_qubits();
        match self {
            Preset::Boeblingen4 | Preset::Boeblingen10 => GateParams::sample(seed, 5, 6 * n),
            Preset::Ourense5 => GateParams::sample(seed, 0, n),
            Preset::Vigo5 => GateParams::sample(seed, 3, n),
        }
    }

    pub fn build(self, params: &GateParams) -> Result<(Circuit, Circuit)> {
        let n = self.n_qubits();
        let (p0, p1) = self.pairs();
        match self {
            Preset::Boeblingen4 | Preset::Boeblingen10 => build_boeblingen_pair(n, 5, 5, params, &p0, &p1),
            Preset::Ourense5 => build_ourense_pair(n, params, &p0),
            Preset::Vigo5 => build_vigo_pair(n, params, &p0),
        }
    }
}

impl FromStr for Preset {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| QrcError::config("preset", format!("unknown preset `{s}`")))
    }
}

/// Rotation about X as a U3 specialization.
pub fn rx_as_u3(q: usize, angle: f64) -> Gate {
    Gate::U3 { q, theta: angle, phi: -FRAC_PI_2, lambda: FRAC_PI_2 }
}

/// Rotation about Y as a U3 specialization.
pub fn ry_as_u3(q: usize, angle: f64) -> Gate {
    Gate::U3 { q, theta: angle, phi: 0.0, lambda: 0.0 }
}

/// Embedded matrix of a gate on an `n`-qubit register (test oracle path;
/// builds the full operator by Kronecker products and a basis permutation).
pub fn embedded_gate_matrix(g: &Gate, n: usize) -> ComplexMatrix {
    let d = 1usize << n;
    match *g {
        Gate::Cx { control, target } => ComplexMatrix::from_fn(d, d, |r, c| {
            let flip = qubit_bit(c, control, n);
            let image = c ^ (flip << (n - 1 - target));
            if r == image {
                ONE
            } else {
                ZERO
            }
        }),
        _ => {
            let q = g.qubits()[0];
            crate::qmath::embed_single(&gate_matrix(g), q, n)
        }
    }
}
