//! Random circuit samplers: i.i.d.-layer circuits and mirror circuits.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitKind, GateOp, Layer};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::graph::ConnectivityGraph;

pub const MAX_DENSITY: f64 = 2.0 / 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Inclusive width range.
    pub widths: (usize, usize),
    /// Depth cap `d_w` per width.
    pub max_depth_by_width: BTreeMap<usize, usize>,
    /// Range the per-circuit CNOT density is drawn from.
    pub two_qubit_density_range: (f64, f64),
    pub seed: u64,
}

impl SamplerConfig {
    /// Widths 1–4 with caps (180, 90, 60, 45) and densities on [0, 2/3].
    pub fn small_device(seed: u64) -> Self {
        SamplerConfig {
            widths: (1, 4),
            max_depth_by_width: [(1, 180), (2, 90), (3, 60), (4, 45)].into_iter().collect(),
            two_qubit_density_range: (0.0, MAX_DENSITY),
            seed,
        }
    }

    /// A single width with a single depth cap.
    pub fn fixed_width(width: usize, max_depth: usize, seed: u64) -> Self {
        SamplerConfig {
            widths: (width, width),
            max_depth_by_width: [(width, max_depth)].into_iter().collect(),
            two_qubit_density_range: (0.0, MAX_DENSITY),
            seed,
        }
    }

    pub fn validate(&self, g: &ConnectivityGraph) -> Result<()> {
        let (lo, hi) = self.widths;
        if lo == 0 || lo > hi || hi > g.n() {
            return Err(Error::WidthOutOfRange {
                width: if lo == 0 { 0 } else { hi },
                max: g.n(),
            });
        }
        for w in lo..=hi {
            match self.max_depth_by_width.get(&w) {
                Some(&d) if d >= 1 => {}
                _ => return Err(Error::Config(format!("no depth cap >= 1 for width {w}"))),
            }
        }
        let (a, b) = self.two_qubit_density_range;
        if !(0.0..=MAX_DENSITY).contains(&a) || !(0.0..=MAX_DENSITY).contains(&b) || a > b {
            return Err(Error::Config(format!(
                "density range [{a}, {b}] must lie within [0, 2/3]"
            )));
        }
        Ok(())
    }

    fn depth_cap(&self, w: usize) -> usize {
        self.max_depth_by_width[&w]
    }
}

/// Generator for the circuit with the given index: one ChaCha stream per index,
/// so parallel generation does not depend on scheduling.
pub fn circuit_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Grows a connected subset from a random qubit by adding random neighbors.
/// Returned ascending.
pub fn sample_connected_subset<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    w: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if w == 0 || w > g.n() {
        return Err(Error::WidthOutOfRange { width: w, max: g.n() });
    }
    let mut inside = vec![false; g.n()];
    let start = rng.random_range(0..g.n());
    inside[start] = true;
    let mut subset = vec![start];
    while subset.len() < w {
        let frontier: Vec<usize> = (0..g.n())
            .filter(|&q| !inside[q] && g.neighbors(q).iter().any(|&p| inside[p]))
            .collect();
        let &q = frontier.choose(rng).expect("connected graph has a frontier");
        inside[q] = true;
        subset.push(q);
    }
    subset.sort_unstable();
    Ok(subset)
}

/// One random layer on `active`: a random maximal matching of the active
/// subgraph is thinned so the expected CNOT-covered fraction is `density`,
/// then every uncovered qubit gets a random single-qubit gate.
pub fn sample_layer<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    active: &[usize],
    density: f64,
    rng: &mut R,
) -> Layer {
    let mut free = vec![false; g.n()];
    for &q in active {
        free[q] = true;
    }
    let mut candidates: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| free[a] && free[b])
        .collect();
    candidates.shuffle(rng);
    let mut matching = Vec::new();
    for (a, b) in candidates {
        if free[a] && free[b] {
            free[a] = false;
            free[b] = false;
            matching.push((a, b));
        }
    }
    for &q in active {
        free[q] = true;
    }
    let mut gates = Vec::with_capacity(active.len());
    if !matching.is_empty() && density > 0.0 {
        let p = (density * active.len() as f64 / (2.0 * matching.len() as f64)).min(1.0);
        for (a, b) in matching {
            if rng.random_bool(p) {
                let op = if rng.random_bool(0.5) {
                    GateOp::cnot(a, b)
                } else {
                    GateOp::cnot(b, a)
                };
                free[a] = false;
                free[b] = false;
                gates.push(op);
            }
        }
    }
    for &q in active {
        if free[q] {
            let &gate = Gate::SINGLE_QUBIT.choose(rng).expect("non-empty");
            gates.push(GateOp::single(gate, q));
        }
    }
    gates.sort_by_key(|op| op.qubits[0].min(*op.qubits.last().unwrap()));
    Layer::new(gates)
}

struct Shape {
    active: Vec<usize>,
    density: f64,
    cap: usize,
}

fn sample_shape<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Shape> {
    cfg.validate(g)?;
    let w = rng.random_range(cfg.widths.0..=cfg.widths.1);
    let active = sample_connected_subset(g, w, rng)?;
    let (lo, hi) = cfg.two_qubit_density_range;
    let density = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    Ok(Shape {
        active,
        density,
        cap: cfg.depth_cap(w),
    })
}

pub fn sample_iid_circuit<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Circuit> {
    let shape = sample_shape(g, cfg, rng)?;
    let depth = rng.random_range(1..=shape.cap);
    let layers = (0..depth)
        .map(|_| sample_layer(g, &shape.active, shape.density, rng))
        .collect();
    Ok(Circuit {
        id: String::new(),
        n: g.n(),
        graph: g.name().to_string(),
        active_qubits: shape.active,
        kind: CircuitKind::Iid,
        layers,
    })
}

/// Prefix, central Pauli layer, then the prefix inverted in reverse order.
pub fn build_mirror(
    g: &ConnectivityGraph,
    active: Vec<usize>,
    prefix: Vec<Layer>,
    central: Layer,
) -> Circuit {
    let mut layers = prefix.clone();
    layers.push(central);
    layers.extend(prefix.iter().rev().map(Layer::inverse));
    Circuit {
        id: String::new(),
        n: g.n(),
        graph: g.name().to_string(),
        active_qubits: active,
        kind: CircuitKind::Mirror,
        layers,
    }
}

/// Mirror circuit with `m` uniform on `[1, max(1, d_w / 6)]` prefix layers.
pub fn sample_mirror_circuit<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Circuit> {
    let shape = sample_shape(g, cfg, rng)?;
    let m = rng.random_range(1..=(shape.cap / 6).max(1));
    let prefix: Vec<Layer> = (0..m)
        .map(|_| sample_layer(g, &shape.active, shape.density, rng))
        .collect();
    let central = Layer::new(
        shape
            .active
            .iter()
            .map(|&q| GateOp::single(*Gate::PAULIS.choose(rng).expect("non-empty"), q))
            .collect(),
    );
    Ok(build_mirror(g, shape.active, prefix, central))
}

fn sample_many(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    count: usize,
    prefix: &str,
    one: impl Fn(&mut ChaCha8Rng) -> Result<Circuit> + Sync,
) -> Result<Vec<Circuit>> {
    cfg.validate(g)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = circuit_rng(cfg.seed, i as u64);
            let mut c = one(&mut rng)?;
            c.id = format!("{prefix}{i:06}");
            c.validate(g)?;
            Ok(c)
        })
        .collect()
}

/// `count` i.i.d.-layer circuits with ids `<prefix><index>`.
pub fn sample_iid_circuits(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    count: usize,
    prefix: &str,
) -> Result<Vec<Circuit>> {
    sample_many(g, cfg, count, prefix, |rng| sample_iid_circuit(g, cfg, rng))
}

pub fn sample_mirror_circuits(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    count: usize,
    prefix: &str,
) -> Result<Vec<Circuit>> {
    sample_many(g, cfg, count, prefix, |rng| sample_mirror_circuit(g, cfg, rng))
}
