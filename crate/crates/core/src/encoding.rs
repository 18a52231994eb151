//! One-hot circuit tensors: what each qubit does in each layer, plus the
//! measured-qubit mask and target bit string.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::circuit::{target_bitstring, Circuit, CircuitKind, GateOp, Layer};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::graph::ConnectivityGraph;
use crate::propagation::Metric;

/// Channel layout for a graph: the 7 single-qubit gates, then CNOT channels
/// indexed by role (control, target) and the partner's slot in the sorted
/// neighbor list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub max_degree: usize,
    pub n_ch: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Control,
    Target,
}

impl ChannelSpec {
    pub fn for_graph(g: &ConnectivityGraph) -> Self {
        let max_degree = g.max_degree();
        ChannelSpec {
            max_degree,
            n_ch: Gate::SINGLE_QUBIT.len() + 2 * max_degree,
        }
    }

    pub fn single_channel(&self, gate: Gate) -> usize {
        gate.single_qubit_index().expect("single-qubit gate")
    }

    pub fn cnot_channel(&self, role: Role, slot: usize) -> usize {
        let r = match role {
            Role::Control => 0,
            Role::Target => 1,
        };
        Gate::SINGLE_QUBIT.len() + r * self.max_degree + slot
    }

    /// Inverse of the channel maps.
    pub fn describe(&self, ch: usize) -> Option<(Gate, Option<(Role, usize)>)> {
        let singles = Gate::SINGLE_QUBIT.len();
        if ch < singles {
            return Some((Gate::SINGLE_QUBIT[ch], None));
        }
        let rest = ch - singles;
        if rest >= 2 * self.max_degree {
            return None;
        }
        let role = if rest < self.max_degree { Role::Control } else { Role::Target };
        Some((Gate::Cnot, Some((role, rest % self.max_degree))))
    }
}

/// Encoded circuit. The one-hot tensor `I[q][l][ch]` is held as one code per
/// (qubit, layer): 0 for idle, otherwise channel + 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitTensor {
    pub n: usize,
    pub d_max: usize,
    pub n_ch: usize,
    pub true_depth: usize,
    codes: Vec<u8>,
    /// Measured-qubit mask (row 1) and target bits (row 2).
    pub m: [Vec<u8>; 2],
}

impl CircuitTensor {
    /// Channel code at `(qubit, layer)`: 0 idle, otherwise channel + 1.
    pub fn code(&self, q: usize, l: usize) -> u8 {
        self.codes[q * self.d_max + l]
    }

    pub fn bit(&self, q: usize, l: usize, ch: usize) -> bool {
        self.code(q, l) as usize == ch + 1
    }

    /// Bits packed LSB-first at index `(q·d_max + l)·n_ch + ch`, base64.
    pub fn packed_bits(&self) -> String {
        let total = self.n * self.d_max * self.n_ch;
        let mut bytes = vec![0u8; total.div_ceil(8)];
        for (cell, &code) in self.codes.iter().enumerate() {
            if code != 0 {
                let idx = cell * self.n_ch + code as usize - 1;
                bytes[idx / 8] |= 1 << (idx % 8);
            }
        }
        B64.encode(bytes)
    }

    /// Rebuilds a tensor from its packed form, checking every invariant.
    pub fn from_packed(
        packed: &str,
        n: usize,
        d_max: usize,
        n_ch: usize,
        true_depth: usize,
        m: [Vec<u8>; 2],
    ) -> Result<Self> {
        let bytes = B64
            .decode(packed)
            .map_err(|e| Error::Config(format!("bad base64 tensor: {e}")))?;
        let total = n * d_max * n_ch;
        if bytes.len() != total.div_ceil(8) {
            return Err(Error::DimensionMismatch(format!(
                "tensor has {} bytes, expected {}",
                bytes.len(),
                total.div_ceil(8)
            )));
        }
        if true_depth > d_max || m[0].len() != n || m[1].len() != n || n_ch > 255 {
            return Err(Error::DimensionMismatch("tensor header is inconsistent".into()));
        }
        let mut codes = vec![0u8; n * d_max];
        for idx in 0..total {
            if bytes[idx / 8] >> (idx % 8) & 1 == 1 {
                let cell = idx / n_ch;
                if codes[cell] != 0 {
                    return Err(Error::Config(format!("fiber {cell} is not one-hot")));
                }
                if cell % d_max >= true_depth {
                    return Err(Error::Config(format!("padding fiber {cell} is non-zero")));
                }
                codes[cell] = (idx % n_ch + 1) as u8;
            }
        }
        for q in 0..n {
            if m[0][q] > 1 || m[1][q] > 1 || (m[0][q] == 0 && m[1][q] == 1) {
                return Err(Error::Config(format!("measurement row entry for qubit {q} is invalid")));
            }
        }
        Ok(CircuitTensor {
            n,
            d_max,
            n_ch,
            true_depth,
            codes,
            m,
        })
    }
}

/// One-hot encoding of the gates; `M` gets the active mask and zero bits.
pub fn encode_circuit(
    c: &Circuit,
    g: &ConnectivityGraph,
    spec: &ChannelSpec,
    d_max: usize,
) -> Result<CircuitTensor> {
    if c.depth() > d_max {
        return Err(Error::DepthExceedsMax {
            depth: c.depth(),
            d_max,
        });
    }
    let mut codes = vec![0u8; c.n * d_max];
    for (l, layer) in c.layers.iter().enumerate() {
        for op in &layer.gates {
            if op.gate == Gate::Cnot {
                let (ctl, tgt) = (op.qubits[0], op.qubits[1]);
                if !g.is_edge(ctl, tgt) {
                    return Err(Error::GateOnNonEdge {
                        layer: l,
                        a: ctl,
                        b: tgt,
                        graph: g.name().to_string(),
                    });
                }
                let slot = |q: usize, p: usize| g.neighbors(q).iter().position(|&x| x == p).unwrap();
                codes[ctl * d_max + l] = (spec.cnot_channel(Role::Control, slot(ctl, tgt)) + 1) as u8;
                codes[tgt * d_max + l] = (spec.cnot_channel(Role::Target, slot(tgt, ctl)) + 1) as u8;
            } else {
                codes[op.qubits[0] * d_max + l] = (spec.single_channel(op.gate) + 1) as u8;
            }
        }
    }
    let mut mask = vec![0u8; c.n];
    for &q in &c.active_qubits {
        mask[q] = 1;
    }
    Ok(CircuitTensor {
        n: c.n,
        d_max,
        n_ch: spec.n_ch,
        true_depth: c.depth(),
        codes,
        m: [mask, vec![0; c.n]],
    })
}

/// `M`: active-qubit mask and, for PST, the target bit string at device
/// positions. Fidelity leaves the second row zero.
pub fn encode_measurement(c: &Circuit, metric: Metric) -> Result<[Vec<u8>; 2]> {
    let mut mask = vec![0u8; c.n];
    let mut bits = vec![0u8; c.n];
    for &q in &c.active_qubits {
        mask[q] = 1;
    }
    if metric == Metric::Pst {
        for (&q, b) in c.active_qubits.iter().zip(target_bitstring(c)?) {
            bits[q] = b;
        }
    }
    Ok([mask, bits])
}

/// Full encoding for a given metric.
pub fn encode(
    c: &Circuit,
    g: &ConnectivityGraph,
    spec: &ChannelSpec,
    d_max: usize,
    metric: Metric,
) -> Result<CircuitTensor> {
    let mut t = encode_circuit(c, g, spec, d_max)?;
    t.m = encode_measurement(c, metric)?;
    Ok(t)
}

/// Reference decoder: recovers layers and active qubits (`kind` is not part
/// of the encoding and comes back as `Iid`).
pub fn decode(t: &CircuitTensor, g: &ConnectivityGraph, spec: &ChannelSpec, id: &str) -> Result<Circuit> {
    let mut layers = Vec::with_capacity(t.true_depth);
    for l in 0..t.true_depth {
        let mut gates = Vec::new();
        for q in 0..t.n {
            let code = t.code(q, l);
            if code == 0 {
                continue;
            }
            let (gate, cnot) = spec
                .describe(code as usize - 1)
                .ok_or_else(|| Error::Config(format!("unknown channel {}", code - 1)))?;
            match cnot {
                None => gates.push(GateOp::single(gate, q)),
                Some((Role::Control, slot)) => {
                    let &p = g
                        .neighbors(q)
                        .get(slot)
                        .ok_or_else(|| Error::Config(format!("qubit {q} has no neighbor slot {slot}")))?;
                    gates.push(GateOp::cnot(q, p));
                }
                Some((Role::Target, _)) => {}
            }
        }
        layers.push(Layer::new(gates));
    }
    let active_qubits = (0..t.n).filter(|&q| t.m[0][q] == 1).collect();
    let c = Circuit {
        id: id.to_string(),
        n: t.n,
        graph: g.name().to_string(),
        active_qubits,
        kind: CircuitKind::Iid,
        layers,
    };
    let round = encode_circuit(&c, g, spec, t.d_max)?;
    if round.codes != t.codes {
        return Err(Error::Config(format!("tensor for `{id}` has inconsistent CNOT channels")));
    }
    Ok(c)
}
