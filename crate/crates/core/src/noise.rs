//! Gate-dependent Markovian error models and their samplers.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::GateOp;
use crate::errgen::{ErrorGenerator, Kind};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::graph::ConnectivityGraph;
use crate::pauli::{Letter, Pauli};

/// Which qubits a gate entry applies to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placement {
    /// A specific ordered qubit tuple.
    On(Vec<usize>),
    /// Every occurrence of the gate, wherever it acts.
    Anywhere,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateKey {
    pub gate: Gate,
    pub placement: Placement,
}

impl GateKey {
    fn encode(&self) -> String {
        match &self.placement {
            Placement::Anywhere => format!("{}@*", self.gate),
            Placement::On(qs) => {
                let qs: Vec<String> = qs.iter().map(|q| q.to_string()).collect();
                format!("{}@{}", self.gate, qs.join(","))
            }
        }
    }

    fn decode(s: &str) -> Result<Self> {
        let (label, qubits) = s
            .split_once('@')
            .ok_or_else(|| Error::Config(format!("gate key `{s}` is missing `@`")))?;
        let gate: Gate = label.parse()?;
        let placement = if qubits == "*" {
            Placement::Anywhere
        } else {
            let qs = qubits
                .split(',')
                .map(|q| {
                    q.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad qubit list in gate key `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if qs.len() != gate.arity() {
                return Err(Error::Config(format!("gate key `{s}` has the wrong arity")));
            }
            Placement::On(qs)
        };
        Ok(GateKey { gate, placement })
    }
}

/// Rates attached to one gate: generators on the full device with their rates.
pub type ErrorVector = Vec<(ErrorGenerator, f64)>;

/// Error channel `exp(Σ rate·G)` following each gate, keyed by gate and
/// placement, plus an optional terminal measurement error vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorModel {
    n: usize,
    gates: BTreeMap<GateKey, ErrorVector>,
    measurement: Option<ErrorVector>,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    kind: Kind,
    pauli: String,
    qubits: Vec<usize>,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    n: usize,
    gates: BTreeMap<String, Vec<RawEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measurement: Option<Vec<RawEntry>>,
}

fn entry_to_raw((e, rate): &(ErrorGenerator, f64)) -> RawEntry {
    let qubits = e.pauli.support();
    RawEntry {
        kind: e.kind,
        pauli: e.pauli.letters_on(&qubits),
        qubits,
        rate: *rate,
    }
}

fn entry_from_raw(n: usize, raw: &RawEntry) -> Result<(ErrorGenerator, f64)> {
    let letters: Vec<Letter> = raw
        .pauli
        .chars()
        .map(|c| Letter::from_char(c).ok_or_else(|| Error::InvalidPauli(raw.pauli.clone())))
        .collect::<Result<_>>()?;
    if letters.len() != raw.qubits.len() || raw.qubits.iter().any(|&q| q >= n) {
        return Err(Error::Config(format!(
            "entry `{}` on {:?} does not fit a {n}-qubit device",
            raw.pauli, raw.qubits
        )));
    }
    let terms: Vec<_> = raw.qubits.iter().copied().zip(letters).collect();
    let pauli = Pauli::from_sparse(n, &terms);
    if pauli.is_identity() {
        return Err(Error::InvalidPauli(raw.pauli.clone()));
    }
    if raw.kind == Kind::S && raw.rate < 0.0 {
        return Err(Error::Config(format!("negative stochastic rate {}", raw.rate)));
    }
    Ok((ErrorGenerator::new(raw.kind, pauli), raw.rate))
}

impl ErrorModel {
    pub fn empty(n: usize) -> Self {
        ErrorModel {
            n,
            gates: BTreeMap::new(),
            measurement: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, key: GateKey, errors: ErrorVector) {
        self.gates.insert(key, errors);
    }

    pub fn set_measurement(&mut self, errors: Option<ErrorVector>) {
        self.measurement = errors;
    }

    pub fn measurement(&self) -> Option<&ErrorVector> {
        self.measurement.as_ref()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&GateKey, &ErrorVector)> {
        self.gates.iter()
    }

    /// Errors following `op`: an exact placement match wins over a wildcard.
    pub fn errors_for(&self, op: &GateOp) -> &[(ErrorGenerator, f64)] {
        let exact = GateKey {
            gate: op.gate,
            placement: Placement::On(op.qubits.to_vec()),
        };
        if let Some(v) = self.gates.get(&exact) {
            return v;
        }
        let any = GateKey {
            gate: op.gate,
            placement: Placement::Anywhere,
        };
        self.gates.get(&any).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ErrorModel {
        let scale = |v: &ErrorVector| v.iter().map(|(e, r)| (e.clone(), r * factor)).collect();
        ErrorModel {
            n: self.n,
            gates: self.gates.iter().map(|(k, v)| (k.clone(), scale(v))).collect(),
            measurement: self.measurement.as_ref().map(scale),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = RawModel {
            n: self.n,
            gates: self
                .gates
                .iter()
                .map(|(k, v)| (k.encode(), v.iter().map(entry_to_raw).collect()))
                .collect(),
            measurement: self
                .measurement
                .as_ref()
                .map(|v| v.iter().map(entry_to_raw).collect()),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)?;
        let n = raw.n;
        let mut gates = BTreeMap::new();
        for (key, entries) in &raw.gates {
            let key = GateKey::decode(key)?;
            let v = entries
                .iter()
                .map(|e| entry_from_raw(n, e))
                .collect::<Result<Vec<_>>>()?;
            gates.insert(key, v);
        }
        let measurement = raw
            .measurement
            .as_ref()
            .map(|v| v.iter().map(|e| entry_from_raw(n, e)).collect::<Result<Vec<_>>>())
            .transpose()?;
        Ok(ErrorModel {
            n,
            gates,
            measurement,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Non-identity Paulis on `qubits` (m = 1 or 2), in letter order.
fn local_paulis(n: usize, qubits: &[usize]) -> Vec<Pauli> {
    let mut out = Vec::new();
    let count = 4usize.pow(qubits.len() as u32);
    for code in 1..count {
        let terms: Vec<_> = qubits
            .iter()
            .enumerate()
            .map(|(i, &q)| (q, Letter::from_index((code >> (2 * i)) & 3)))
            .collect();
        out.push(Pauli::from_sparse(n, &terms));
    }
    out
}

/// Every gate placement on the device: single-qubit gates on each qubit,
/// CNOT in both directions across each edge.
fn placements(g: &ConnectivityGraph, gates: &[Gate]) -> Vec<(Gate, Vec<usize>)> {
    let mut out = Vec::new();
    for &gate in gates {
        if gate == Gate::Cnot {
            for &(a, b) in g.edges() {
                out.push((gate, vec![a, b]));
                out.push((gate, vec![b, a]));
            }
        } else {
            for q in 0..g.n() {
                out.push((gate, vec![q]));
            }
        }
    }
    out
}

/// Local coherent model: each gate placement gets an overall strength
/// `ε ~ U[0, max_strength]` spread over all H generators on its qubits by a
/// random direction, scaled so the squared rates sum to `ε`.
pub fn sample_coherent_model<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    gates: &[Gate],
    max_strength: f64,
    rng: &mut R,
) -> Result<ErrorModel> {
    if max_strength <= 0.0 || !max_strength.is_finite() {
        return Err(Error::Config(format!("max_strength must be positive, got {max_strength}")));
    }
    let mut model = ErrorModel::empty(g.n());
    for (gate, qubits) in placements(g, gates) {
        let strength = rng.random::<f64>() * max_strength;
        let paulis = local_paulis(g.n(), &qubits);
        let rel: Vec<f64> = paulis.iter().map(|_| rng.random::<f64>()).collect();
        let norm = rel.iter().map(|r| r * r).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { strength.sqrt() / norm } else { 0.0 };
        let errors = paulis
            .into_iter()
            .zip(&rel)
            .map(|(p, r)| (ErrorGenerator::h(p), r * scale))
            .collect();
        model.insert(
            GateKey {
                gate,
                placement: Placement::On(qubits),
            },
            errors,
        );
    }
    Ok(model)
}

/// Qubit-independent model: each gate label carries every weight-1 S rate
/// `~ U[0, max_s]` and H rate `~ U[0, max_h]` on the whole device.
pub fn sample_weight1_model<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    gates: &[Gate],
    max_s: f64,
    max_h: f64,
    rng: &mut R,
) -> Result<ErrorModel> {
    if max_s < 0.0 || max_h < 0.0 {
        return Err(Error::Config("rate bounds must be nonnegative".into()));
    }
    let n = g.n();
    let mut model = ErrorModel::empty(n);
    for &gate in gates {
        let mut errors = Vec::with_capacity(6 * n);
        for q in 0..n {
            for l in Letter::NON_IDENTITY {
                let p = Pauli::single(n, q, l);
                errors.push((ErrorGenerator::h(p.clone()), rng.random::<f64>() * max_h));
                errors.push((ErrorGenerator::s(p), rng.random::<f64>() * max_s));
            }
        }
        model.insert(
            GateKey {
                gate,
                placement: Placement::Anywhere,
            },
            errors,
        );
    }
    Ok(model)
}

pub const DEFAULT_MAX_STRENGTH: f64 = 2.5e-4;
pub const DEFAULT_MAX_S: f64 = 1e-7;
pub const DEFAULT_MAX_H: f64 = 5e-5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::circuit_rng;

    #[test]
    fn coherent_entry_sizes_and_norm() {
        let g = ConnectivityGraph::ring(4);
        let model =
            sample_coherent_model(&g, &Gate::ALL, DEFAULT_MAX_STRENGTH, &mut circuit_rng(1, 0))
                .unwrap();
        assert_eq!(model.entries().count(), 7 * 4 + 2 * 4);
        for (key, v) in model.entries() {
            let expect = if key.gate == Gate::Cnot { 15 } else { 3 };
            assert_eq!(v.len(), expect);
            assert!(v.iter().all(|(e, _)| e.kind == Kind::H));
            let sq: f64 = v.iter().map(|(_, r)| r * r).sum();
            assert!(sq <= DEFAULT_MAX_STRENGTH + 1e-15);
        }
    }

    #[test]
    fn squared_rates_sum_to_strength() {
        let g = ConnectivityGraph::ring(1);
        let mut rng = circuit_rng(2, 0);
        let model = sample_coherent_model(&g, &[Gate::Xpi], 1.0, &mut rng).unwrap();
        // Replay the draws to recover the strength.
        let mut replay = circuit_rng(2, 0);
        let strength: f64 = replay.random::<f64>();
        let v = model.entries().next().unwrap().1;
        let sq: f64 = v.iter().map(|(_, r)| r * r).sum();
        assert!((sq - strength).abs() < 1e-12);
    }

    #[test]
    fn weight1_shape_and_bounds() {
        let g = ConnectivityGraph::ring(100);
        let model = sample_weight1_model(&g, &Gate::ALL, DEFAULT_MAX_S, DEFAULT_MAX_H, &mut circuit_rng(3, 0))
            .unwrap();
        for (key, v) in model.entries() {
            assert_eq!(key.placement, Placement::Anywhere);
            assert_eq!(v.len(), 600);
            for (e, r) in v {
                let bound = if e.kind == Kind::S { DEFAULT_MAX_S } else { DEFAULT_MAX_H };
                assert!((0.0..=bound).contains(r));
            }
        }
        let one = sample_weight1_model(&ConnectivityGraph::ring(1), &[Gate::Xpi], 1e-7, 5e-5, &mut circuit_rng(3, 0))
            .unwrap();
        assert_eq!(one.entries().next().unwrap().1.len(), 6);
    }

    #[test]
    fn json_roundtrip_and_determinism() {
        let g = ConnectivityGraph::tbar5();
        let a = sample_coherent_model(&g, &Gate::ALL, 2.5e-4, &mut circuit_rng(4, 0)).unwrap();
        let b = sample_coherent_model(&g, &Gate::ALL, 2.5e-4, &mut circuit_rng(4, 0)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = ErrorModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
        assert!(a.to_json().unwrap().contains("\"CNOT@0,1\""));
    }

    #[test]
    fn lookup_prefers_exact_placement() {
        let n = 2;
        let mut m = ErrorModel::empty(n);
        let any = vec![(ErrorGenerator::s(Pauli::single(n, 0, Letter::X)), 0.1)];
        let exact = vec![(ErrorGenerator::s(Pauli::single(n, 1, Letter::Z)), 0.2)];
        m.insert(GateKey { gate: Gate::Xpi, placement: Placement::Anywhere }, any.clone());
        m.insert(GateKey { gate: Gate::Xpi, placement: Placement::On(vec![1]) }, exact.clone());
        assert_eq!(m.errors_for(&GateOp::single(Gate::Xpi, 1)), exact.as_slice());
        assert_eq!(m.errors_for(&GateOp::single(Gate::Xpi, 0)), any.as_slice());
        assert!(m.errors_for(&GateOp::single(Gate::Ypi, 0)).is_empty());
    }

    #[test]
    fn rejects_malformed_json() {
        let bad = r#"{"n":2,"gates":{"Xpi@0":[{"kind":"S","pauli":"X","qubits":[0],"rate":-1.0}]}}"#;
        assert!(ErrorModel::from_json(bad).is_err());
        let bad = r#"{"n":2,"gates":{"Xpi@0":[{"kind":"H","pauli":"XY","qubits":[0],"rate":1.0}]}}"#;
        assert!(ErrorModel::from_json(bad).is_err());
        let bad = r#"{"n":2,"gates":{"CNOT@0":[]}}"#;
        assert!(ErrorModel::from_json(bad).is_err());
    }
}
