//! Line-oriented reservoir definition files.
//!
//! ```text
//! subsystems=1
//! [subsystem]
//! qubits=5
//! eps=0.1
//! sigma=zeros
//! U0
//! RY 1 0.5
//! CX 0 1
//! U1
//! RX 0 1.25
//! ```
//!
//! Gates are listed in the order they act. `sigma` is `zeros` (`|0…0⟩`) or
//! `mixed` (`I/2^n`). `#` starts a comment.

use std::fmt::Write as _;

use crate::circuits::{Circuit, Preset};
use crate::error::{QrcError, Result};
use crate::qmath::DensityOperator;
use crate::reservoir::{make_subclass_model, ReservoirModel, Subsystem};

pub fn dump(model: &ReservoirModel, comment: Option<&str>) -> Result<String> {
    let mut s = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(s, "# {line}").unwrap();
        }
    }
    writeln!(s, "subsystems={}", model.subsystems().len()).unwrap();
    for sub in model.subsystems() {
        let (u0, u1) = sub
            .circuits()
            .ok_or_else(|| QrcError::contract("only circuit-defined subsystems can be written"))?;
        let sigma = if *sub.sigma() == DensityOperator::zeros(sub.n_qubits()) {
            "zeros"
        } else if *sub.sigma() == DensityOperator::maximally_mixed(sub.n_qubits()) {
            "mixed"
        } else {
            return Err(QrcError::contract("sigma must be |0…0⟩ or I/2^n to be written"));
        };
        writeln!(s, "[subsystem]\nqubits={}\neps={}\nsigma={sigma}", sub.n_qubits(), sub.eps()).unwrap();
        write!(s, "U0\n{}U1\n{}", u0.to_text(), u1.to_text()).unwrap();
    }
    Ok(s)
}

#[derive(Default)]
struct Block {
    qubits: Option<usize>,
    eps: Option<f64>,
    sigma: Option<String>,
    u0: Vec<(usize, String)>,
    u1: Vec<(usize, String)>,
    start: usize,
}

enum Section {
    Header,
    U0,
    U1,
}

fn err(line: usize, msg: impl Into<String>) -> QrcError {
    QrcError::Parse { line, msg: msg.into() }
}

fn value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| err(line, format!("bad value for `{key}`: `{v}`")))
}

fn circuit(n: usize, lines: &[(usize, String)]) -> Result<Circuit> {
    let mut gates = Vec::new();
    for (no, text) in lines {
        let c = Circuit::parse(n, text, *no)?;
        gates.extend_from_slice(c.gates());
    }
    Circuit::new(n, gates)
}

impl Block {
    fn build(self) -> Result<Subsystem> {
        let n = self.qubits.ok_or_else(|| err(self.start, "missing `qubits=`"))?;
        let eps = self.eps.ok_or_else(|| err(self.start, "missing `eps=`"))?;
        let sigma = match self.sigma.as_deref() {
            Some("zeros") | None => DensityOperator::zeros(n),
            Some("mixed") => DensityOperator::maximally_mixed(n),
            Some(other) => return Err(err(self.start, format!("unknown sigma `{other}`"))),
        };
        let (u0, u1) = (circuit(n, &self.u0)?, circuit(n, &self.u1)?);
        let model = make_subclass_model(&u0, &u1, eps, sigma).map_err(|e| err(self.start, e.to_string()))?;
        Ok(model.subsystems()[0].clone())
    }
}

pub fn parse(text: &str) -> Result<ReservoirModel> {
    let mut declared = None;
    let mut blocks: Vec<Block> = Vec::new();
    let mut section = Section::Header;
    for (k, raw) in text.lines().enumerate() {
        let no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "[subsystem]" {
            blocks.push(Block {
                start: no,
                ..Block::default()
            });
            section = Section::Header;
            continue;
        }
        if let Some((key, v)) = line.split_once('=') {
            let key = key.trim();
            if key == "subsystems" {
                declared = Some(value::<usize>(no, key, v)?);
                continue;
            }
            let block = blocks.last_mut().ok_or_else(|| err(no, "setting outside a `[subsystem]` block"))?;
            if !matches!(section, Section::Header) {
                return Err(err(no, "settings must precede U0/U1"));
            }
            match key {
                "qubits" => block.qubits = Some(value(no, key, v)?),
                "eps" => block.eps = Some(value(no, key, v)?),
                "sigma" => block.sigma = Some(v.trim().to_string()),
                _ => return Err(err(no, format!("unknown key `{key}`"))),
            }
            continue;
        }
        let block = blocks.last_mut().ok_or_else(|| err(no, "content outside a `[subsystem]` block"))?;
        match line {
            "U0" => section = Section::U0,
            "U1" => section = Section::U1,
            _ => match section {
                Section::U0 => block.u0.push((no, line.to_string())),
                Section::U1 => block.u1.push((no, line.to_string())),
                Section::Header => return Err(err(no, format!("expected U0, U1 or key=value, got `{line}`"))),
            },
        }
    }
    if let Some(d) = declared {
        if d != blocks.len() {
            return Err(err(1, format!("declared {d} subsystems, found {}", blocks.len())));
        }
    }
    if blocks.is_empty() {
        return Err(err(1, "no `[subsystem]` block"));
    }
    ReservoirModel::new(blocks.into_iter().map(Block::build).collect::<Result<_>>()?)
}

/// A preset circuit pair with freshly sampled angles.
pub fn preset_model(preset: Preset, seed: u64, eps: f64) -> Result<ReservoirModel> {
    let params = preset.sample_params(seed);
    let (u0, u1) = preset.build(&params)?;
    make_subclass_model(&u0, &u1, eps, DensityOperator::zeros(preset.n_qubits()))
}
