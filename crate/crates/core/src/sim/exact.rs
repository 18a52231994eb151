//! Exact noisy simulation in the Pauli-transfer-matrix picture.
//!
//! Everything is expressed on the circuit's active qubits only (local qubit
//! `k` is `active_qubits[k]`). Gates and error channels are applied as small
//! blocks on the qubits they touch, so a full `4^w × 4^w` layer matrix is
//! never formed during simulation.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use smallvec::SmallVec;

use crate::circuit::{target_bitstring, Circuit, GateOp, Layer};
use crate::errgen::{ErrorGenerator, Kind};
use crate::error::{Error, Result};
use crate::noise::{ErrorModel, Placement};
use crate::pauli::Letter;
use crate::sim::dense::{gate_ptm, generator_ptm_local};

/// Default width limit for exact simulation (PTMs of 256 × 256).
pub const DEFAULT_CAP: usize = 4;

/// A Pauli transfer matrix on `n` qubits in the local Pauli-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct Ptm {
    pub n: usize,
    pub matrix: DMatrix<f64>,
}

enum BlockOp {
    Dense(DMatrix<f64>),
    /// Column `t` maps to `sign[t]` times row `perm[t]`.
    Monomial { perm: Vec<usize>, sign: Vec<f64> },
}

struct Block {
    qubits: SmallVec<[usize; 4]>,
    op: BlockOp,
}

fn monomial(m: &DMatrix<f64>) -> BlockOp {
    let mut perm = Vec::with_capacity(m.ncols());
    let mut sign = Vec::with_capacity(m.ncols());
    for t in 0..m.ncols() {
        let (row, &v) = m
            .column(t)
            .iter()
            .enumerate()
            .find(|(_, v)| **v != 0.0)
            .expect("gate PTM columns are non-zero");
        perm.push(row);
        sign.push(v);
    }
    BlockOp::Monomial { perm, sign }
}

/// Applies a block to every column of a column-major `dim × cols` state.
fn apply_block(state: &mut [f64], dim: usize, block: &Block) {
    let bsize = 1usize << (2 * block.qubits.len());
    let offsets: Vec<usize> = (0..bsize)
        .map(|s| {
            block
                .qubits
                .iter()
                .enumerate()
                .map(|(k, &q)| ((s >> (2 * k)) & 3) << (2 * q))
                .sum()
        })
        .collect();
    let mask: usize = block.qubits.iter().map(|&q| 3 << (2 * q)).sum();
    let bases: Vec<usize> = (0..dim).filter(|i| i & mask == 0).collect();
    let mut input = vec![0.0; bsize];
    for col in state.chunks_exact_mut(dim) {
        for &base in &bases {
            for (s, &o) in offsets.iter().enumerate() {
                input[s] = col[base + o];
            }
            match &block.op {
                BlockOp::Dense(m) => {
                    for (s, &o) in offsets.iter().enumerate() {
                        let mut acc = 0.0;
                        for (t, &x) in input.iter().enumerate() {
                            acc += m[(s, t)] * x;
                        }
                        col[base + o] = acc;
                    }
                }
                BlockOp::Monomial { perm, sign } => {
                    for t in 0..bsize {
                        col[base + offsets[perm[t]]] = sign[t] * input[t];
                    }
                }
            }
        }
    }
}

/// Local generator matrix, memoized for weight ≤ 2.
fn local_generator(kind: Kind, letters: &[Letter]) -> DMatrix<f64> {
    static SMALL: OnceLock<HashMap<(Kind, Vec<Letter>), DMatrix<f64>>> = OnceLock::new();
    if letters.len() > 2 {
        return generator_ptm_local(kind, letters);
    }
    let table = SMALL.get_or_init(|| {
        let mut t = HashMap::new();
        for m in 1..=2usize {
            for idx in 0..4usize.pow(m as u32) {
                let ls: Vec<Letter> = (0..m).map(|k| Letter::from_index((idx >> (2 * k)) & 3)).collect();
                for kind in [Kind::H, Kind::S] {
                    t.insert((kind, ls.clone()), generator_ptm_local(kind, &ls));
                }
            }
        }
        t
    });
    table[&(kind, letters.to_vec())].clone()
}

/// Embeds a block acting on local positions `sub` (indices into a component
/// of `m` qubits) into the full `4^m` component space.
fn embed(small: &DMatrix<f64>, sub: &[usize], m: usize) -> DMatrix<f64> {
    let dim = 1usize << (2 * m);
    let mut big = DMatrix::identity(dim, dim);
    let block = Block {
        qubits: sub.iter().copied().collect(),
        op: BlockOp::Dense(small.clone()),
    };
    apply_block(big.as_mut_slice(), dim, &block);
    big
}

/// `exp(Σ rate·G)` for terms all supported on `qubits` (device indices);
/// the result is indexed by position in `qubits`.
fn noise_exp(terms: &[(&ErrorGenerator, f64)], qubits: &[usize]) -> DMatrix<f64> {
    let m = qubits.len();
    let dim = 1usize << (2 * m);
    let mut gen = DMatrix::zeros(dim, dim);
    for &(e, rate) in terms {
        let support = e.pauli.support();
        let letters: Vec<Letter> = support.iter().map(|&q| e.pauli.letter(q)).collect();
        let sub: Vec<usize> = support
            .iter()
            .map(|q| qubits.iter().position(|p| p == q).expect("term inside component"))
            .collect();
        gen += embed(&local_generator(e.kind, &letters), &sub, m) * rate;
    }
    gen.exp()
}

/// Groups terms into connected components of overlapping supports.
fn components<'a>(terms: &[(&'a ErrorGenerator, f64)]) -> Vec<(Vec<usize>, Vec<(&'a ErrorGenerator, f64)>)> {
    let supports: Vec<Vec<usize>> = terms.iter().map(|(e, _)| e.pauli.support()).collect();
    let mut parent: Vec<usize> = (0..terms.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for a in 0..terms.len() {
        for b in a + 1..terms.len() {
            if supports[a].iter().any(|q| supports[b].contains(q)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>, Vec<(&ErrorGenerator, f64)>)> = Vec::new();
    for i in 0..terms.len() {
        let r = find(&mut parent, i);
        let g = match groups.iter_mut().position(|g| g.0 == r) {
            Some(p) => &mut groups[p],
            None => {
                groups.push((r, Vec::new(), Vec::new()));
                groups.last_mut().unwrap()
            }
        };
        for &q in &supports[i] {
            if !g.1.contains(&q) {
                g.1.push(q);
            }
        }
        g.2.push(terms[i]);
    }
    groups
        .into_iter()
        .map(|(_, mut qs, ts)| {
            qs.sort_unstable();
            (qs, ts)
        })
        .collect()
}

/// Exact simulator bound to one error model. Gate placements whose errors
/// stay on the gate's own qubits get a precomputed fused block.
pub struct ExactSimulator<'a> {
    model: &'a ErrorModel,
    cap: usize,
    fused: HashMap<GateOp, DMatrix<f64>>,
}

impl<'a> ExactSimulator<'a> {
    pub fn new(model: &'a ErrorModel) -> Self {
        Self::with_cap(model, DEFAULT_CAP)
    }

    pub fn with_cap(model: &'a ErrorModel, cap: usize) -> Self {
        let mut fused = HashMap::new();
        for (key, errors) in model.entries() {
            let Placement::On(qubits) = &key.placement else {
                continue;
            };
            let local = errors
                .iter()
                .all(|(e, _)| e.pauli.support().iter().all(|q| qubits.contains(q)));
            if !local {
                continue;
            }
            let terms: Vec<_> = errors.iter().map(|(e, r)| (e, *r)).collect();
            let block = noise_exp(&terms, qubits) * gate_ptm(key.gate);
            fused.insert(
                GateOp {
                    gate: key.gate,
                    qubits: qubits.iter().copied().collect(),
                },
                block,
            );
        }
        ExactSimulator { model, cap, fused }
    }

    fn local_map(&self, c: &Circuit) -> Result<Vec<Option<usize>>> {
        if c.width() > self.cap {
            return Err(Error::WidthOverCap {
                width: c.width(),
                cap: self.cap,
            });
        }
        if c.n != self.model.n() {
            return Err(Error::DimensionMismatch(format!(
                "circuit has {} qubits, error model {}",
                c.n,
                self.model.n()
            )));
        }
        let mut map = vec![None; c.n];
        for (k, &q) in c.active_qubits.iter().enumerate() {
            map[q] = Some(k);
        }
        Ok(map)
    }

    fn localize(map: &[Option<usize>], qubits: &[usize]) -> Result<SmallVec<[usize; 4]>> {
        qubits
            .iter()
            .map(|&q| {
                map.get(q).copied().flatten().ok_or_else(|| {
                    Error::InvalidCircuit(format!("qubit {q} is not an active qubit"))
                })
            })
            .collect()
    }

    /// Blocks for error terms not covered by fused gate blocks. Terms entirely
    /// on inactive qubits cannot affect the active register and are dropped.
    fn noise_blocks(map: &[Option<usize>], terms: &[(&ErrorGenerator, f64)]) -> Result<Vec<Block>> {
        let mut kept = Vec::new();
        for &(e, r) in terms {
            let support = e.pauli.support();
            let active = support.iter().filter(|&&q| map[q].is_some()).count();
            if active == support.len() {
                if r != 0.0 {
                    kept.push((e, r));
                }
            } else if active > 0 {
                return Err(Error::InvalidCircuit(format!(
                    "error {e} straddles active and inactive qubits"
                )));
            }
        }
        components(&kept)
            .into_iter()
            .map(|(qubits, ts)| {
                Ok(Block {
                    qubits: Self::localize(map, &qubits)?,
                    op: BlockOp::Dense(noise_exp(&ts, &qubits)),
                })
            })
            .collect()
    }

    fn layer_blocks(&self, map: &[Option<usize>], layer: &Layer, noisy: bool) -> Result<Vec<Block>> {
        let all_fused = layer
            .gates
            .iter()
            .all(|op| self.fused.contains_key(op) || self.model.errors_for(op).is_empty());
        let mut blocks = Vec::new();
        let mut pending = Vec::new();
        for op in &layer.gates {
            let qubits = Self::localize(map, &op.qubits)?;
            match self.fused.get(op) {
                Some(f) if noisy && all_fused => blocks.push(Block {
                    qubits,
                    op: BlockOp::Dense(f.clone()),
                }),
                _ => {
                    blocks.push(Block {
                        qubits,
                        op: monomial(gate_ptm(op.gate)),
                    });
                    if noisy {
                        pending.extend(self.model.errors_for(op).iter().map(|(e, r)| (e, *r)));
                    }
                }
            }
        }
        if !pending.is_empty() {
            blocks.extend(Self::noise_blocks(map, &pending)?);
        }
        Ok(blocks)
    }

    fn evolve(&self, c: &Circuit, map: &[Option<usize>], state: &mut [f64], noisy: bool) -> Result<()> {
        let dim = 1usize << (2 * c.width());
        for (i, layer) in c.layers.iter().enumerate() {
            let blocks = self.layer_blocks(map, layer, noisy).map_err(|e| match e {
                Error::InvalidCircuit(msg) => Error::InvalidCircuit(format!("layer {i}: {msg}")),
                other => other,
            })?;
            for b in &blocks {
                apply_block(state, dim, b);
            }
        }
        Ok(())
    }

    /// Process fidelity `Tr(Ũ·Uᵀ) / 4^w` between the noisy and ideal circuit.
    pub fn fidelity(&self, c: &Circuit) -> Result<f64> {
        let map = self.local_map(c)?;
        let dim = 1usize << (2 * c.width());
        let identity = DMatrix::<f64>::identity(dim, dim);
        let mut noisy = identity.clone();
        let mut ideal = identity;
        self.evolve(c, &map, noisy.as_mut_slice(), true)?;
        self.evolve(c, &map, ideal.as_mut_slice(), false)?;
        Ok(noisy.dot(&ideal) / dim as f64)
    }

    /// Probability of the ideal outcome bit string, starting from `|0…0⟩`.
    /// The model's measurement error vector, if any, is applied just before
    /// readout.
    pub fn pst(&self, c: &Circuit) -> Result<f64> {
        let bits = target_bitstring(c)?;
        let map = self.local_map(c)?;
        let w = c.width();
        let dim = 1usize << (2 * w);
        // Coefficients c_P = Tr(P ρ): 1 on every Z-type Pauli for |0…0⟩.
        let z_type = |idx: usize| (0..w).all(|k| matches!((idx >> (2 * k)) & 3, 0 | 3));
        let mut state: Vec<f64> = (0..dim).map(|i| if z_type(i) { 1.0 } else { 0.0 }).collect();
        self.evolve(c, &map, &mut state, true)?;
        if let Some(meas) = self.model.measurement() {
            let terms: Vec<_> = meas.iter().map(|(e, r)| (e, *r)).collect();
            for b in Self::noise_blocks(&map, &terms)? {
                apply_block(&mut state, dim, &b);
            }
        }
        let mut p = 0.0;
        for (idx, &coef) in state.iter().enumerate() {
            if !z_type(idx) {
                continue;
            }
            let parity = (0..w)
                .filter(|&k| (idx >> (2 * k)) & 3 == 3 && bits[k] == 1)
                .count();
            p += if parity % 2 == 0 { coef } else { -coef };
        }
        Ok(p / (1usize << w) as f64)
    }

    /// Noisy PTM of one layer on a device of `n ≤ cap` qubits, all active.
    pub fn layer_ptm(&self, layer: &Layer, n: usize) -> Result<Ptm> {
        if n > self.cap {
            return Err(Error::WidthOverCap { width: n, cap: self.cap });
        }
        let map: Vec<Option<usize>> = (0..n).map(Some).collect();
        let dim = 1usize << (2 * n);
        let mut m = DMatrix::<f64>::identity(dim, dim);
        for b in self.layer_blocks(&map, layer, true)? {
            apply_block(m.as_mut_slice(), dim, &b);
        }
        Ok(Ptm { n, matrix: m })
    }
}

/// Generator matrix of `g` on the full `n`-qubit register.
pub fn generator_ptm(g: &ErrorGenerator, n: usize) -> Result<Ptm> {
    if n > DEFAULT_CAP {
        return Err(Error::WidthOverCap { width: n, cap: DEFAULT_CAP });
    }
    if g.pauli.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "generator on {} qubits, register of {n}",
            g.pauli.n()
        )));
    }
    let support = g.pauli.support();
    let letters: Vec<Letter> = support.iter().map(|&q| g.pauli.letter(q)).collect();
    Ok(Ptm {
        n,
        matrix: embed(&local_generator(g.kind, &letters), &support, n),
    })
}

pub fn noisy_layer_ptm(layer: &Layer, model: &ErrorModel, n: usize) -> Result<Ptm> {
    ExactSimulator::new(model).layer_ptm(layer, n)
}

pub fn exact_fidelity(c: &Circuit, model: &ErrorModel) -> Result<f64> {
    ExactSimulator::new(model).fidelity(c)
}

pub fn exact_pst(c: &Circuit, model: &ErrorModel) -> Result<f64> {
    ExactSimulator::new(model).pst(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitKind;
    use crate::gate::Gate;
    use crate::noise::GateKey;
    use crate::pauli::Pauli;

    fn one_qubit(gate: Gate, kind: Kind, letter: Letter, rate: f64) -> (Circuit, ErrorModel) {
        let c = Circuit {
            id: "t".into(),
            n: 1,
            graph: "ring:1".into(),
            active_qubits: vec![0],
            kind: CircuitKind::Iid,
            layers: vec![Layer::new(vec![GateOp::single(gate, 0)])],
        };
        let mut m = ErrorModel::empty(1);
        m.insert(
            GateKey {
                gate,
                placement: Placement::On(vec![0]),
            },
            vec![(ErrorGenerator::new(kind, Pauli::single(1, 0, letter)), rate)],
        );
        (c, m)
    }

    #[test]
    fn stochastic_x_closed_forms() {
        let s = 0.03;
        let (c, m) = one_qubit(Gate::Xpi, Kind::S, Letter::X, s);
        let expect = (1.0 + (-2.0 * s).exp()) / 2.0;
        assert!((exact_fidelity(&c, &m).unwrap() - expect).abs() < 1e-14);
        assert!((exact_pst(&c, &m).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn coherent_x_is_cos_squared() {
        let theta = 0.07;
        let (c, m) = one_qubit(Gate::Xpi, Kind::H, Letter::X, theta);
        assert!((exact_fidelity(&c, &m).unwrap() - theta.cos().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn stochastic_z_leaves_outcome_alone() {
        let (c, m) = one_qubit(Gate::Xpi, Kind::S, Letter::Z, 0.05);
        assert!((exact_pst(&c, &m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn error_free_is_exactly_one() {
        let (c, _) = one_qubit(Gate::Ypi2, Kind::S, Letter::X, 0.0);
        let m = ErrorModel::empty(1);
        assert_eq!(exact_fidelity(&c, &m).unwrap(), 1.0);
        let layer = Layer::new(vec![GateOp::single(Gate::Xpi2, 0)]);
        assert_eq!(noisy_layer_ptm(&layer, &m, 1).unwrap().matrix, *gate_ptm(Gate::Xpi2));
    }

    #[test]
    fn layer_ptm_scales_and_preserves_trace() {
        let s = 0.02;
        let (c, m) = one_qubit(Gate::Xpi, Kind::S, Letter::X, s);
        let ptm = noisy_layer_ptm(&c.layers[0], &m, 1).unwrap().matrix;
        let ideal = gate_ptm(Gate::Xpi);
        for (a, b) in [(2usize, 2usize), (3, 3)] {
            assert!((ptm[(a, b)] - ideal[(a, b)] * (-2.0 * s).exp()).abs() < 1e-15);
        }
        assert!((ptm[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(ptm.row(0).iter().skip(1).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn width_cap_enforced() {
        let c = Circuit {
            id: "w".into(),
            n: 5,
            graph: "ring:5".into(),
            active_qubits: (0..5).collect(),
            kind: CircuitKind::Iid,
            layers: vec![Layer::default()],
        };
        assert!(matches!(
            exact_fidelity(&c, &ErrorModel::empty(5)),
            Err(Error::WidthOverCap { width: 5, cap: 4 })
        ));
    }

    #[test]
    fn generator_matrix_full_register() {
        let g = ErrorGenerator::parse("S:IX").unwrap();
        let ptm = generator_ptm(&g, 2).unwrap().matrix;
        // Z on qubit 1 alone is index 3·4 = 12 and decays at rate 2.
        assert_eq!(ptm[(12, 12)], -2.0);
        assert_eq!(ptm[(3, 3)], 0.0);
    }
}
