//! Circuit intermediate representation and its JSON-lines file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::clifford::{tableau_of_layer, CliffordTableau};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::graph::ConnectivityGraph;
use crate::pauli::{Letter, Pauli, SignedPauli};

/// One gate applied to an ordered qubit tuple (`[control, target]` for CNOT).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(Gate, Vec<usize>)", into = "(Gate, Vec<usize>)")]
pub struct GateOp {
    pub gate: Gate,
    pub qubits: SmallVec<[usize; 2]>,
}

impl From<(Gate, Vec<usize>)> for GateOp {
    fn from((gate, qubits): (Gate, Vec<usize>)) -> Self {
        GateOp {
            gate,
            qubits: qubits.into(),
        }
    }
}

impl From<GateOp> for (Gate, Vec<usize>) {
    fn from(op: GateOp) -> Self {
        (op.gate, op.qubits.to_vec())
    }
}

impl GateOp {
    pub fn single(gate: Gate, q: usize) -> Self {
        GateOp {
            gate,
            qubits: smallvec![q],
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp {
            gate: Gate::Cnot,
            qubits: smallvec![control, target],
        }
    }

    pub fn inverse(&self) -> GateOp {
        GateOp {
            gate: self.gate.inverse(),
            qubits: self.qubits.clone(),
        }
    }
}

/// Gates executed in parallel on disjoint qubits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layer {
    pub gates: Vec<GateOp>,
}

impl Layer {
    pub fn new(gates: Vec<GateOp>) -> Self {
        Layer { gates }
    }

    /// Gate-by-gate inverse; valid for the built-in gate set.
    pub fn inverse(&self) -> Layer {
        Layer::new(self.gates.iter().map(GateOp::inverse).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Gate acting on `q`, if any.
    pub fn gate_on(&self, q: usize) -> Option<&GateOp> {
        self.gates.iter().find(|op| op.qubits.contains(&q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitKind {
    Iid,
    Mirror,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub id: String,
    /// Device qubit count.
    pub n: usize,
    /// Graph spec string the circuit was built for.
    pub graph: String,
    pub active_qubits: Vec<usize>,
    pub kind: CircuitKind,
    pub layers: Vec<Layer>,
}

impl Circuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.active_qubits.len()
    }

    /// Checks every structural invariant against the device graph.
    pub fn validate(&self, g: &ConnectivityGraph) -> Result<()> {
        if self.n != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "circuit `{}` is for {} qubits, graph {} has {}",
                self.id,
                self.n,
                g.name(),
                g.n()
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidCircuit(format!("circuit `{}` has no layers", self.id)));
        }
        let mut active = vec![false; self.n];
        for &q in &self.active_qubits {
            if q >= self.n || active[q] {
                return Err(Error::InvalidCircuit(format!(
                    "circuit `{}`: bad or repeated active qubit {q}",
                    self.id
                )));
            }
            active[q] = true;
        }
        if !g.is_connected_subset(&self.active_qubits) {
            return Err(Error::InvalidCircuit(format!(
                "circuit `{}`: active qubits {:?} are not connected",
                self.id, self.active_qubits
            )));
        }
        for (li, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.n];
            for op in &layer.gates {
                if op.qubits.len() != op.gate.arity() {
                    return Err(Error::InvalidCircuit(format!(
                        "layer {li}: {} expects {} qubits, got {}",
                        op.gate,
                        op.gate.arity(),
                        op.qubits.len()
                    )));
                }
                for &q in &op.qubits {
                    if q >= self.n || !active[q] {
                        return Err(Error::InvalidCircuit(format!(
                            "layer {li}: {} acts on inactive qubit {q}",
                            op.gate
                        )));
                    }
                    if used[q] {
                        return Err(Error::OverlappingGates { layer: li, qubit: q });
                    }
                    used[q] = true;
                }
                if op.gate == Gate::Cnot && !g.is_edge(op.qubits[0], op.qubits[1]) {
                    return Err(Error::GateOnNonEdge {
                        layer: li,
                        a: op.qubits[0],
                        b: op.qubits[1],
                        graph: g.name().to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Tableau of the whole circuit, `U(L_d)···U(L_1)`.
    pub fn tableau(&self) -> Result<CliffordTableau> {
        let mut t = CliffordTableau::identity(self.n);
        for layer in &self.layers {
            t = CliffordTableau::compose(&tableau_of_layer(layer, self.n)?, &t)?;
        }
        Ok(t)
    }

    /// True iff every active `Z_q` pulled back through the circuit stays Z-type.
    pub fn is_definite_outcome(&self) -> bool {
        target_bitstring(self).is_ok()
    }
}

/// The unique error-free outcome `b(c)` over the active qubits (in
/// `active_qubits` order).
///
/// Each `Z_q` is conjugated backwards through the circuit (`U† Z_q U`); for a
/// definite-outcome circuit the result is `±Z`-type and its sign fixes the bit.
pub fn target_bitstring(c: &Circuit) -> Result<Vec<u8>> {
    let mut inverse = CliffordTableau::identity(c.n);
    for layer in c.layers.iter().rev() {
        inverse = CliffordTableau::compose(&tableau_of_layer(&layer.inverse(), c.n)?, &inverse)?;
    }
    c.active_qubits
        .iter()
        .map(|&q| {
            let img = inverse.conjugate(&SignedPauli::plus(Pauli::single(c.n, q, Letter::Z)))?;
            if img.contains_xy() {
                return Err(Error::NotDefiniteOutcome {
                    qubit: q,
                    image: img.to_string(),
                });
            }
            Ok(img.negative as u8)
        })
        .collect()
}

/// Writes circuits as JSON lines.
pub fn write_circuits(path: &Path, circuits: &[Circuit]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in circuits {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a circuit JSON-lines file; when a graph is given every circuit is
/// validated against it. Errors carry the 1-based line number.
pub fn read_circuits(path: &Path, graph: Option<&ConnectivityGraph>) -> Result<Vec<Circuit>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |msg: String| Error::Schema {
            path: path.display().to_string(),
            line: i + 1,
            msg,
        };
        let c: Circuit = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if let Some(g) = graph {
            c.validate(g).map_err(|e| schema(e.to_string()))?;
        }
        out.push(c);
    }
    Ok(out)
}
