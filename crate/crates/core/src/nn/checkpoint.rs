//! JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::ChannelSpec;
use crate::errgen::{ErrorGenerator, TrackedErrorSet};
use crate::error::{Error, Result};
use crate::graph::ConnectivityGraph;
use crate::propagation::Metric;

use super::mlp::Mlp;
use super::model::{FilterSpec, MeasNet, QpaModel};
use super::train::TrainHistory;

pub const SCHEMA: &str = "qcap-checkpoint";
pub const VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct NetJson {
    error: String,
    window: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    name: String,
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointJson {
    schema: String,
    version: u64,
    metric: Metric,
    graph: GraphJson,
    hops: usize,
    max_weight: usize,
    filter_hops: usize,
    meas_filter_hops: usize,
    tracked_set: Vec<String>,
    scale: f64,
    rate_unit: f64,
    widths: Vec<usize>,
    n_ch: usize,
    n_params: usize,
    /// One measurement net per X/Y-containing tracked error.
    meas_net_policy: String,
    nets: Vec<NetJson>,
    meas_nets: Vec<NetJson>,
    train_history: TrainHistory,
}

/// Short name of a generator: kind, letters on its support, support
/// (`"H:XZ@[0,1]"`).
pub fn short_name(e: &ErrorGenerator) -> String {
    let support = e.pauli.support();
    let qubits: Vec<String> = support.iter().map(usize::to_string).collect();
    format!("{}:{}@[{}]", e.kind.as_char(), e.pauli.letters_on(&support), qubits.join(","))
}

fn net_json(e: &ErrorGenerator, window: &[usize], m: &Mlp) -> NetJson {
    NetJson {
        error: short_name(e),
        window: window.to_vec(),
        weights: m.weights.clone(),
        biases: m.biases.clone(),
    }
}

fn net_from_json(j: &NetJson, input: usize, widths: &[usize], ctx: &str) -> Result<Mlp> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(widths);
    let m = Mlp {
        sizes: sizes.clone(),
        weights: j.weights.clone(),
        biases: j.biases.clone(),
    };
    let ok = m.weights.len() == sizes.len() - 1
        && m.biases.len() == sizes.len() - 1
        && sizes
            .windows(2)
            .enumerate()
            .all(|(l, w)| m.weights[l].len() == w[0] * w[1] && m.biases[l].len() == w[1]);
    if !ok {
        return Err(Error::DimensionMismatch(format!("{ctx}: net shapes do not match {sizes:?}")));
    }
    Ok(m)
}

pub fn to_json(model: &QpaModel, history: &TrainHistory) -> Result<String> {
    let g = model.ts.graph();
    let cp = CheckpointJson {
        schema: SCHEMA.into(),
        version: VERSION,
        metric: model.metric,
        graph: GraphJson {
            name: g.name().into(),
            n: g.n(),
            edges: g.edges().to_vec(),
        },
        hops: model.ts.hops(),
        max_weight: model.ts.max_weight(),
        filter_hops: model.filter.l,
        meas_filter_hops: model.filter.l_meas,
        tracked_set: model.ts.generators().iter().map(ToString::to_string).collect(),
        scale: model.scale,
        rate_unit: model.rate_unit,
        widths: model.widths.clone(),
        n_ch: model.spec.n_ch,
        n_params: model.n_params(),
        meas_net_policy: "per-xy-error".into(),
        nets: model
            .nets
            .iter()
            .enumerate()
            .map(|(j, m)| net_json(model.ts.get(j), &model.filter.windows[j], m))
            .collect(),
        meas_nets: model
            .meas_nets
            .iter()
            .map(|m| net_json(model.ts.get(m.error), &m.window, &m.net))
            .collect(),
        train_history: history.clone(),
    };
    Ok(serde_json::to_string_pretty(&cp)?)
}

pub fn from_json(text: &str, ctx: &str) -> Result<(QpaModel, TrainHistory)> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if value.get("schema").and_then(|v| v.as_str()) != Some(SCHEMA) {
        return Err(Error::Config(format!("{ctx}: not a checkpoint file")));
    }
    if version != VERSION {
        return Err(Error::VersionMismatch {
            path: ctx.into(),
            found: version,
            expected: VERSION,
        });
    }
    let cp: CheckpointJson = serde_json::from_value(value)?;
    let g = ConnectivityGraph::from_edges(cp.graph.name.clone(), cp.graph.n, &cp.graph.edges)?;
    let ts = TrackedErrorSet::build(&g, cp.hops, cp.max_weight)?;
    let names: Vec<String> = ts.generators().iter().map(ToString::to_string).collect();
    if names != cp.tracked_set {
        return Err(Error::Config(format!(
            "{ctx}: tracked set does not match graph {} with h={}, max_weight={}",
            cp.graph.name, cp.hops, cp.max_weight
        )));
    }
    let spec = ChannelSpec::for_graph(&g);
    if spec.n_ch != cp.n_ch || cp.nets.len() != ts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{ctx}: expected {} nets with {} channels, found {} with {}",
            ts.len(),
            spec.n_ch,
            cp.nets.len(),
            cp.n_ch
        )));
    }
    let mut windows = Vec::with_capacity(ts.len());
    let mut nets = Vec::with_capacity(ts.len());
    for (j, nj) in cp.nets.iter().enumerate() {
        if nj.error != short_name(ts.get(j)) {
            return Err(Error::Config(format!("{ctx}: net {j} is for {}, expected {}", nj.error, short_name(ts.get(j)))));
        }
        nets.push(net_from_json(nj, nj.window.len() * spec.n_ch, &cp.widths, ctx)?);
        windows.push(nj.window.clone());
    }
    let mut meas_nets = Vec::with_capacity(cp.meas_nets.len());
    for nj in &cp.meas_nets {
        let e = ts
            .generators()
            .iter()
            .position(|e| short_name(e) == nj.error)
            .ok_or_else(|| Error::GeneratorNotTracked(nj.error.clone()))?;
        meas_nets.push(MeasNet {
            error: e,
            window: nj.window.clone(),
            net: net_from_json(nj, 2 * nj.window.len(), &cp.widths, ctx)?,
        });
    }
    let filter = FilterSpec {
        l: cp.filter_hops,
        l_meas: cp.meas_filter_hops,
        windows,
    };
    let model = QpaModel::from_parts(ts, spec, filter, cp.metric, cp.scale, cp.rate_unit, cp.widths, nets, meas_nets);
    Ok((model, cp.train_history))
}

pub fn save(path: &Path, model: &QpaModel, history: &TrainHistory) -> Result<()> {
    let text = to_json(model, history)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(QpaModel, TrainHistory)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text, &path.display().to_string())
}
