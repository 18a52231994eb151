//! The windowed per-error model and its differentiable head.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::dataset::DatasetRecord;
use crate::encoding::ChannelSpec;
use crate::errgen::{Kind, TrackedErrorSet};
use crate::error::{Error, Result};
use crate::propagation::{Metric, PropagationTables, RateMatrix};

use super::mlp::{Activations, Input, Mlp};

pub const DEFAULT_HIDDEN: [usize; 6] = [30, 20, 10, 5, 5, 1];
pub const DEFAULT_SCALE: f64 = 10_000.0;
/// Rate represented by a unit net output.
pub const DEFAULT_RATE_UNIT: f64 = 1e-5;

/// Which qubits each net looks at.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    pub l: usize,
    pub l_meas: usize,
    /// Gate-net window of every tracked error (ascending qubits).
    pub windows: Vec<Vec<usize>>,
}

impl FilterSpec {
    pub fn build(ts: &TrackedErrorSet, l: usize, l_meas: usize) -> Self {
        let g = ts.graph();
        let windows = ts
            .generators()
            .iter()
            .map(|e| g.ball(&e.pauli.support(), l))
            .collect();
        FilterSpec { l, l_meas, windows }
    }

    pub fn meas_window(&self, ts: &TrackedErrorSet, j: usize) -> Vec<usize> {
        ts.graph().ball(&ts.get(j).pauli.support(), self.l_meas)
    }
}

/// A measurement net attached to one tracked error.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasNet {
    pub error: usize,
    pub window: Vec<usize>,
    pub net: Mlp,
}

#[derive(Clone, Debug)]
pub struct QpaModel {
    pub ts: TrackedErrorSet,
    pub spec: ChannelSpec,
    pub filter: FilterSpec,
    pub metric: Metric,
    pub scale: f64,
    /// Rates are `rate_unit` times the raw net outputs.
    pub rate_unit: f64,
    /// Hidden and output widths shared by every net.
    pub widths: Vec<usize>,
    pub nets: Vec<Mlp>,
    pub meas_nets: Vec<MeasNet>,
    groups: Vec<WindowGroup>,
    /// Group of every gate net.
    of_net: Vec<usize>,
}

/// Gate nets sharing one window; their inputs are gathered once per batch.
#[derive(Clone, Debug)]
struct WindowGroup {
    window: Vec<usize>,
}

fn group_windows(windows: &[Vec<usize>]) -> (Vec<WindowGroup>, Vec<usize>) {
    let mut groups: Vec<WindowGroup> = Vec::new();
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut of_net = Vec::with_capacity(windows.len());
    for w in windows {
        let gi = *index.entry(w.as_slice()).or_insert_with(|| {
            groups.push(WindowGroup { window: w.clone() });
            groups.len() - 1
        });
        of_net.push(gi);
    }
    (groups, of_net)
}

/// Builds a model with seeded uniform fan-in initialization. Net `j` draws
/// from stream `j`; measurement nets continue after the gate nets.
pub fn build_model(
    ts: &TrackedErrorSet,
    spec: &ChannelSpec,
    filter: FilterSpec,
    metric: Metric,
    widths: &[usize],
    seed: u64,
) -> Result<QpaModel> {
    if widths.last() != Some(&1) {
        return Err(Error::Config("the last layer width must be 1".into()));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    if filter.windows.len() != ts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} windows for {} tracked errors",
            filter.windows.len(),
            ts.len()
        )));
    }
    let sizes = |input: usize| {
        let mut s = vec![input];
        s.extend_from_slice(widths);
        s
    };
    let seeded = |stream: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        rng
    };
    let nets = filter
        .windows
        .iter()
        .enumerate()
        .map(|(j, w)| Mlp::random(&sizes(w.len() * spec.n_ch), &mut seeded(j)))
        .collect();
    let meas_nets = match metric {
        Metric::Fidelity => Vec::new(),
        Metric::Pst => ts
            .xy_indices()
            .into_iter()
            .map(|j| {
                let window = filter.meas_window(ts, j);
                let net = Mlp::random(&sizes(2 * window.len()), &mut seeded(ts.len() + j));
                MeasNet { error: j, window, net }
            })
            .collect(),
    };
    Ok(QpaModel::from_parts(
        ts.clone(),
        spec.clone(),
        filter,
        metric,
        DEFAULT_SCALE,
        DEFAULT_RATE_UNIT,
        widths.to_vec(),
        nets,
        meas_nets,
    ))
}

/// Gradients with the same shape as the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub nets: Vec<Mlp>,
    pub meas_nets: Vec<Mlp>,
}

impl Gradients {
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.nets
            .iter()
            .chain(&self.meas_nets)
            .flat_map(|m| m.params())
    }
}

/// Prediction with its intermediate rates.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub prediction: f64,
    pub rates: RateMatrix,
    /// `(tracked index, rate)` from measurement nets.
    pub measurement: Vec<(usize, f64)>,
}

/// Deduplicated gate-net inputs of one window group over a batch.
struct GroupInputs {
    indices: Vec<u32>,
    offsets: Vec<usize>,
    /// Unique-input index of every (record, layer) row.
    row_uid: Vec<u32>,
}

impl GroupInputs {
    fn input(&self) -> Input<'_> {
        Input::Sparse {
            indices: &self.indices,
            offsets: &self.offsets,
        }
    }
}

struct Prepared {
    /// First row of each record in the concatenated (record, layer) rows.
    row_base: Vec<usize>,
    groups: Vec<GroupInputs>,
    /// Dense inputs per measurement net, `batch × 2|W'|`.
    meas: Vec<Vec<f64>>,
}

impl QpaModel {
    pub fn k(&self) -> usize {
        self.ts.len()
    }

    pub fn n_params(&self) -> usize {
        self.nets.iter().map(Mlp::n_params).sum::<usize>()
            + self.meas_nets.iter().map(|m| m.net.n_params()).sum::<usize>()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.nets
            .iter()
            .chain(self.meas_nets.iter().map(|m| &m.net))
            .flat_map(|m| m.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.nets
            .iter_mut()
            .chain(self.meas_nets.iter_mut().map(|m| &mut m.net))
            .flat_map(|m| m.params_mut())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            nets: self.nets.iter().map(|m| Mlp::zeros(&m.sizes)).collect(),
            meas_nets: self.meas_nets.iter().map(|m| Mlp::zeros(&m.net.sizes)).collect(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        ts: TrackedErrorSet,
        spec: ChannelSpec,
        filter: FilterSpec,
        metric: Metric,
        scale: f64,
        rate_unit: f64,
        widths: Vec<usize>,
        nets: Vec<Mlp>,
        meas_nets: Vec<MeasNet>,
    ) -> Self {
        let (groups, of_net) = group_windows(&filter.windows);
        QpaModel {
            ts,
            spec,
            filter,
            metric,
            scale,
            rate_unit,
            widths,
            nets,
            meas_nets,
            groups,
            of_net,
        }
    }

    fn check(&self, r: &DatasetRecord) -> Result<()> {
        let t = &r.tensor;
        if t.n != self.ts.n() || t.n_ch != self.spec.n_ch {
            return Err(Error::DimensionMismatch(format!(
                "record `{}` has n={}, n_ch={}; model expects n={}, n_ch={}",
                r.id,
                t.n,
                t.n_ch,
                self.ts.n(),
                self.spec.n_ch
            )));
        }
        if r.tables.k() != self.k() || r.tables.depth() != t.true_depth {
            return Err(Error::DimensionMismatch(format!(
                "record `{}` tables are {}x{}, expected {}x{}",
                r.id,
                r.tables.depth(),
                r.tables.k(),
                t.true_depth,
                self.k()
            )));
        }
        Ok(())
    }

    fn prepare(&self, records: &[&DatasetRecord]) -> Result<Prepared> {
        for r in records {
            self.check(r)?;
        }
        let mut row_base = Vec::with_capacity(records.len() + 1);
        let mut rows = 0;
        for r in records {
            row_base.push(rows);
            rows += r.tensor.true_depth;
        }
        row_base.push(rows);
        let n_ch = self.spec.n_ch;
        let groups = self
            .groups
            .par_iter()
            .map(|g| {
                let mut seen: HashMap<SmallVec<[u8; 8]>, u32> = HashMap::new();
                let mut gi = GroupInputs {
                    indices: Vec::new(),
                    offsets: vec![0],
                    row_uid: Vec::with_capacity(rows),
                };
                for r in records {
                    for l in 0..r.tensor.true_depth {
                        let key: SmallVec<[u8; 8]> = g.window.iter().map(|&q| r.tensor.code(q, l)).collect();
                        let next = seen.len() as u32;
                        let uid = *seen.entry(key.clone()).or_insert_with(|| {
                            for (p, &code) in key.iter().enumerate() {
                                if code != 0 {
                                    gi.indices.push((p * n_ch + code as usize - 1) as u32);
                                }
                            }
                            gi.offsets.push(gi.indices.len());
                            next
                        });
                        gi.row_uid.push(uid);
                    }
                }
                gi
            })
            .collect();
        let meas = self
            .meas_nets
            .iter()
            .map(|m| {
                let mut data = Vec::with_capacity(records.len() * 2 * m.window.len());
                for r in records {
                    for &q in &m.window {
                        data.push(f64::from(r.tensor.m[0][q]));
                        data.push(f64::from(r.tensor.m[1][q]));
                    }
                }
                data
            })
            .collect();
        Ok(Prepared { row_base, groups, meas })
    }

    /// Gate-net outputs per net over its group's unique inputs, and
    /// measurement-net outputs per record.
    fn outputs(&self, prep: &Prepared) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let of_net = &self.of_net;
        let gate = (0..self.nets.len())
            .into_par_iter()
            .map(|j| {
                let gi = &prep.groups[of_net[j]];
                self.nets[j].forward(&gi.input()).output().to_vec()
            })
            .collect();
        let meas = self
            .meas_nets
            .par_iter()
            .zip(&prep.meas)
            .map(|(m, data)| m.net.forward(&Input::Dense { data }).output().to_vec())
            .collect();
        (gate, meas)
    }

    /// Accumulated per-key values of record `r` in the batch.
    fn values(&self, tables: &PropagationTables, rate: impl Fn(usize, usize) -> f64, meas: &[(usize, f64)]) -> Vec<f64> {
        let mut values = vec![0.0; tables.keys().len()];
        for i in 0..tables.depth() {
            let keys = tables.key_row(i);
            let signs = tables.sign_row(i);
            for j in 0..tables.k() {
                values[keys[j] as usize] += f64::from(signs[j]) * rate(i, j);
            }
        }
        for &(j, v) in meas {
            values[tables.tracked_key(j)] += v;
        }
        values
    }

    /// `∂prediction/∂value[key]` for every key.
    fn head_slopes(&self, tables: &PropagationTables, values: &[f64]) -> Vec<f64> {
        tables
            .keys()
            .iter()
            .zip(values)
            .map(|(key, &v)| {
                if !self.metric.counts(key) {
                    0.0
                } else {
                    match key.kind {
                        Kind::S => -1.0,
                        Kind::H => -2.0 * v,
                    }
                }
            })
            .collect()
    }

    fn batch_forward(&self, records: &[&DatasetRecord]) -> Result<Vec<ForwardOutput>> {
        let prep = self.prepare(records)?;
        let (gate, meas) = self.outputs(&prep);
        let of_net = &self.of_net;
        Ok(records
            .iter()
            .enumerate()
            .map(|(b, r)| {
                let base = prep.row_base[b];
                let mut rates = RateMatrix::zeros(r.tensor.true_depth, self.k());
                for i in 0..r.tensor.true_depth {
                    let row = rates.row_mut(i);
                    for (j, out) in gate.iter().enumerate() {
                        row[j] = self.rate_unit * out[prep.groups[of_net[j]].row_uid[base + i] as usize];
                    }
                }
                let measurement: Vec<(usize, f64)> = self
                    .meas_nets
                    .iter()
                    .zip(&meas)
                    .map(|(m, o)| (m.error, self.rate_unit * o[b]))
                    .collect();
                let values = self.values(&r.tables, |i, j| rates.get(i, j), &measurement);
                ForwardOutput {
                    prediction: r.tables.head(&values, self.metric),
                    rates,
                    measurement,
                }
            })
            .collect())
    }

    pub fn forward(&self, record: &DatasetRecord) -> Result<ForwardOutput> {
        Ok(self.batch_forward(&[record])?.remove(0))
    }

    /// Predictions in input order, evaluated in fixed-size chunks.
    pub fn predict_batch(&self, records: &[DatasetRecord]) -> Result<Vec<f64>> {
        const CHUNK: usize = 64;
        let refs: Vec<&DatasetRecord> = records.iter().collect();
        let mut out = Vec::with_capacity(records.len());
        for chunk in refs.chunks(CHUNK) {
            out.extend(self.batch_forward(chunk)?.into_iter().map(|f| f.prediction));
        }
        Ok(out)
    }

    /// Mean scaled squared error over `records` and its parameter gradients.
    pub fn loss_and_gradients(&self, records: &[&DatasetRecord]) -> Result<(f64, Gradients)> {
        if records.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let prep = self.prepare(records)?;
        let of_net = &self.of_net;
        let gate_acts: Vec<Activations> = (0..self.nets.len())
            .into_par_iter()
            .map(|j| self.nets[j].forward(&prep.groups[of_net[j]].input()))
            .collect();
        let meas_acts: Vec<Activations> = self
            .meas_nets
            .par_iter()
            .zip(&prep.meas)
            .map(|(m, data)| m.net.forward(&Input::Dense { data }))
            .collect();
        let gate: Vec<&[f64]> = gate_acts.iter().map(Activations::output).collect();
        let meas: Vec<&[f64]> = meas_acts.iter().map(Activations::output).collect();
        let mut d_gate: Vec<Vec<f64>> = gate.iter().map(|o| vec![0.0; o.len()]).collect();
        let mut d_meas: Vec<Vec<f64>> = meas.iter().map(|o| vec![0.0; o.len()]).collect();
        let batch = records.len() as f64;
        let s2 = self.scale * self.scale;
        let mut loss = 0.0;
        for (b, r) in records.iter().enumerate() {
            let base = prep.row_base[b];
            let uid = |i: usize, j: usize| prep.groups[of_net[j]].row_uid[base + i] as usize;
            let unit = self.rate_unit;
            let measurement: Vec<(usize, f64)> =
                self.meas_nets.iter().zip(&meas).map(|(m, o)| (m.error, unit * o[b])).collect();
            let values = self.values(&r.tables, |i, j| unit * gate[j][uid(i, j)], &measurement);
            let pred = r.tables.head(&values, self.metric);
            let diff = pred - r.target;
            loss += s2 * diff * diff;
            let g = 2.0 * s2 * diff / batch * unit;
            let slopes = self.head_slopes(&r.tables, &values);
            for i in 0..r.tables.depth() {
                let keys = r.tables.key_row(i);
                let signs = r.tables.sign_row(i);
                for j in 0..self.k() {
                    let d = slopes[keys[j] as usize];
                    if d != 0.0 {
                        d_gate[j][uid(i, j)] += g * f64::from(signs[j]) * d;
                    }
                }
            }
            for (m, dm) in self.meas_nets.iter().zip(d_meas.iter_mut()) {
                dm[b] += g * slopes[r.tables.tracked_key(m.error)];
            }
        }
        let nets = (0..self.nets.len())
            .into_par_iter()
            .map(|j| {
                let mut grad = Mlp::zeros(&self.nets[j].sizes);
                let input = prep.groups[of_net[j]].input();
                self.nets[j].backward(&input, &gate_acts[j], &d_gate[j], &mut grad);
                grad
            })
            .collect();
        let meas_nets = self
            .meas_nets
            .par_iter()
            .enumerate()
            .map(|(t, m)| {
                let mut grad = Mlp::zeros(&m.net.sizes);
                let input = Input::Dense { data: &prep.meas[t] };
                m.net.backward(&input, &meas_acts[t], &d_meas[t], &mut grad);
                grad
            })
            .collect();
        Ok((loss / batch, Gradients { nets, meas_nets }))
    }

    /// Mean scaled squared error without gradients.
    pub fn loss(&self, records: &[DatasetRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let preds = self.predict_batch(records)?;
        let s2 = self.scale * self.scale;
        let sum: f64 = preds
            .iter()
            .zip(records)
            .map(|(p, r)| s2 * (p - r.target) * (p - r.target))
            .sum();
        Ok(sum / records.len() as f64)
    }
}
