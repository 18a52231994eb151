//! Dataset assembly (filter, dedupe, split) and the JSON-lines dataset format.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Layer};
use crate::encoding::{decode, encode, ChannelSpec, CircuitTensor};
use crate::errgen::{ErrorGenerator, TrackedErrorSet};
use crate::error::{Error, Result};
use crate::graph::ConnectivityGraph;
use crate::propagation::{compute_propagation, Metric, PropagationTables};

pub const SCHEMA: &str = "qcap-dataset";
pub const VERSION: u64 = 1;

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.5625, 0.1875, 0.25];

/// One simulated or measured value for a circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRecord {
    pub id: String,
    pub metric: Metric,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<(u64, u64)>,
}

pub fn write_values(path: &Path, values: &[ValueRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for v in values {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_values(path: &Path) -> Result<Vec<ValueRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub circuit: Circuit,
    pub tensor: CircuitTensor,
    pub tables: PropagationTables,
    pub target: f64,
    pub metric: Metric,
    pub shots: Option<(u64, u64)>,
}

/// Shared description of every record in a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub version: u64,
    pub graph: String,
    pub hops: usize,
    pub max_weight: usize,
    pub metric: Metric,
    pub n_ch: usize,
    pub d_max: usize,
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<DatasetRecord>,
    pub validation: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
    pub fractions: [f64; 3],
    pub threshold: f64,
    pub seed: u64,
    pub d_max: usize,
    pub warnings: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct AssembleOptions {
    pub metric: Metric,
    /// Records with a value below this are dropped.
    pub threshold: f64,
    pub fractions: [f64; 3],
    pub seed: u64,
    /// Padding depth; defaults to the deepest retained circuit.
    pub d_max: Option<usize>,
}

impl AssembleOptions {
    pub fn new(metric: Metric, threshold: f64, seed: u64) -> Self {
        AssembleOptions {
            metric,
            threshold,
            fractions: DEFAULT_FRACTIONS,
            seed,
            d_max: None,
        }
    }
}

/// Builds a single record (encoding plus propagation tables).
pub fn make_record(
    c: &Circuit,
    ts: &TrackedErrorSet,
    spec: &ChannelSpec,
    d_max: usize,
    metric: Metric,
    target: f64,
    shots: Option<(u64, u64)>,
) -> Result<DatasetRecord> {
    Ok(DatasetRecord {
        id: c.id.clone(),
        circuit: c.clone(),
        tensor: encode(c, ts.graph(), spec, d_max, metric)?,
        tables: compute_propagation(c, ts)?,
        target,
        metric,
        shots,
    })
}

fn split_counts(total: usize, fractions: [f64; 3]) -> (usize, usize) {
    let train = ((fractions[0] * total as f64).round() as usize).min(total);
    let val = ((fractions[1] * total as f64).round() as usize).min(total - train);
    (train, val)
}

/// Filters by threshold, removes duplicate circuits, shuffles with the seed,
/// splits by fractions and attaches tensors and propagation tables.
pub fn assemble(
    circuits: &[Circuit],
    values: &HashMap<String, ValueRecord>,
    ts: &TrackedErrorSet,
    opts: &AssembleOptions,
) -> Result<DatasetSplit> {
    let sum: f64 = opts.fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || opts.fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::Config(format!("split fractions {:?} must be nonnegative and sum to 1", opts.fractions)));
    }
    let mut seen: HashSet<(&[usize], &[Layer])> = HashSet::new();
    let mut kept = Vec::new();
    let mut duplicates = 0usize;
    let mut below = 0usize;
    for c in circuits {
        let v = values.get(&c.id).ok_or_else(|| Error::MissingValue(c.id.clone()))?;
        if v.value < opts.threshold {
            below += 1;
            continue;
        }
        if !seen.insert((&c.active_qubits, &c.layers)) {
            duplicates += 1;
            continue;
        }
        kept.push((c, v));
    }
    let mut warnings = Vec::new();
    if kept.is_empty() {
        let msg = format!(
            "no circuit reaches the threshold {} ({} of {} below); the split is empty",
            opts.threshold,
            below,
            circuits.len()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if duplicates > 0 {
        log::info!("removed {duplicates} duplicate circuits");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    kept.shuffle(&mut rng);
    let d_max = opts
        .d_max
        .unwrap_or_else(|| kept.iter().map(|(c, _)| c.depth()).max().unwrap_or(1));
    let spec = ChannelSpec::for_graph(ts.graph());
    let records = kept
        .par_iter()
        .map(|(c, v)| make_record(c, ts, &spec, d_max, opts.metric, v.value, v.shots))
        .collect::<Result<Vec<_>>>()?;
    let (n_train, n_val) = split_counts(records.len(), opts.fractions);
    let mut it = records.into_iter();
    let train: Vec<_> = it.by_ref().take(n_train).collect();
    let validation: Vec<_> = it.by_ref().take(n_val).collect();
    let test: Vec<_> = it.collect();
    Ok(DatasetSplit {
        train,
        validation,
        test,
        fractions: opts.fractions,
        threshold: opts.threshold,
        seed: opts.seed,
        d_max,
        warnings,
    })
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    #[serde(rename = "I")]
    bits: String,
    n: usize,
    d_max: usize,
    n_ch: usize,
    true_depth: usize,
    #[serde(rename = "M")]
    m: [Vec<u8>; 2],
}

/// Interned propagation table: distinct final generators plus per-entry indices.
#[derive(Serialize, Deserialize)]
struct RawPerm {
    keys: Vec<String>,
    index: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    target: String,
    metric: Metric,
    shots: Option<(u64, u64)>,
    tensor: RawTensor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perm: Option<RawPerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sign: Option<Vec<Vec<i8>>>,
}

/// Whether propagation tables are written into each record or recomputed
/// from the decoded circuit when the file is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TablesMode {
    Inline,
    Recompute,
}

fn raw_record(r: &DatasetRecord, mode: TablesMode) -> RawRecord {
    let t = &r.tensor;
    let (perm, sign) = match mode {
        TablesMode::Recompute => (None, None),
        TablesMode::Inline => {
            let tb = &r.tables;
            let perm = RawPerm {
                keys: tb.keys().iter().map(|e| e.to_string()).collect(),
                index: (0..tb.depth()).map(|i| tb.key_row(i).to_vec()).collect(),
            };
            let sign = (0..tb.depth()).map(|i| tb.sign_row(i).to_vec()).collect();
            (Some(perm), Some(sign))
        }
    };
    RawRecord {
        id: r.id.clone(),
        target: format!("{:.16e}", r.target),
        metric: r.metric,
        shots: r.shots,
        tensor: RawTensor {
            bits: t.packed_bits(),
            n: t.n,
            d_max: t.d_max,
            n_ch: t.n_ch,
            true_depth: t.true_depth,
            m: t.m.clone(),
        },
        perm,
        sign,
    }
}

/// Writes a header line followed by one line per record.
pub fn write_dataset(
    path: &Path,
    header: &DatasetHeader,
    records: &[DatasetRecord],
    mode: TablesMode,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for r in records {
        serde_json::to_writer(&mut w, &raw_record(r, mode))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn header_for(ts: &TrackedErrorSet, metric: Metric, d_max: usize) -> DatasetHeader {
    DatasetHeader {
        schema: SCHEMA.into(),
        version: VERSION,
        graph: ts.graph().name().to_string(),
        hops: ts.hops(),
        max_weight: ts.max_weight(),
        metric,
        n_ch: ChannelSpec::for_graph(ts.graph()).n_ch,
        d_max,
    }
}

fn parse_record(
    raw: RawRecord,
    header: &DatasetHeader,
    g: &ConnectivityGraph,
    ts: &TrackedErrorSet,
    spec: &ChannelSpec,
) -> Result<DatasetRecord> {
    let target: f64 = raw
        .target
        .parse()
        .map_err(|_| Error::Config(format!("target `{}` is not a number", raw.target)))?;
    let rt = raw.tensor;
    if rt.n != g.n() || rt.n_ch != spec.n_ch || rt.d_max != header.d_max {
        return Err(Error::DimensionMismatch(format!(
            "tensor is {}x{}x{}, header says {}x{}x{}",
            rt.n,
            rt.d_max,
            rt.n_ch,
            g.n(),
            header.d_max,
            spec.n_ch
        )));
    }
    let tensor = CircuitTensor::from_packed(&rt.bits, rt.n, rt.d_max, rt.n_ch, rt.true_depth, rt.m)?;
    let circuit = decode(&tensor, g, spec, &raw.id)?;
    circuit.validate(g)?;
    let tables = match (raw.perm, raw.sign) {
        (Some(perm), Some(sign)) => {
            let keys = perm
                .keys
                .iter()
                .map(|s| ErrorGenerator::parse(s))
                .collect::<Result<Vec<_>>>()?;
            if perm.index.len() != sign.len() {
                return Err(Error::DimensionMismatch("perm and sign row counts differ".into()));
            }
            let rows = perm
                .index
                .iter()
                .zip(&sign)
                .map(|(idx, sg)| {
                    if idx.len() != sg.len() || idx.len() != ts.len() {
                        return Err(Error::DimensionMismatch(format!(
                            "table row has {} entries, tracked set has {}",
                            idx.len(),
                            ts.len()
                        )));
                    }
                    idx.iter()
                        .zip(sg)
                        .map(|(&i, &s)| {
                            let key = keys.get(i as usize).ok_or_else(|| {
                                Error::DimensionMismatch(format!("perm index {i} out of range"))
                            })?;
                            Ok((key.clone(), s))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            if rows.len() != circuit.depth() {
                return Err(Error::DimensionMismatch("table depth differs from circuit depth".into()));
            }
            PropagationTables::from_entries(&rows)?
        }
        (None, None) => compute_propagation(&circuit, ts)?,
        _ => return Err(Error::Config("perm and sign must be given together".into())),
    };
    Ok(DatasetRecord {
        id: raw.id,
        circuit,
        tensor,
        tables,
        target,
        metric: raw.metric,
        shots: raw.shots,
    })
}

/// Reads a dataset file. Tables missing from records are recomputed; the
/// whole load fails on the first invalid line.
pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, TrackedErrorSet, Vec<DatasetRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let schema = |line: usize, msg: String| Error::Schema {
        path: path.display().to_string(),
        line,
        msg,
    };
    let (_, first) = lines.next().ok_or_else(|| schema(1, "empty dataset file".into()))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&first).map_err(|e| schema(1, e.to_string()))?;
    let version = value.get("version").and_then(|v| v.as_u64());
    if value.get("schema").and_then(|v| v.as_str()) != Some(SCHEMA) {
        return Err(schema(1, format!("missing `{SCHEMA}` header")));
    }
    if version != Some(VERSION) {
        return Err(Error::VersionMismatch {
            path: path.display().to_string(),
            found: version.unwrap_or(0),
            expected: VERSION,
        });
    }
    let header: DatasetHeader = serde_json::from_value(value).map_err(|e| schema(1, e.to_string()))?;
    let g = ConnectivityGraph::from_spec(&header.graph)?;
    let ts = TrackedErrorSet::build(&g, header.hops, header.max_weight)?;
    let spec = ChannelSpec::for_graph(&g);
    let raws = lines
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(Error::io(path, e))),
        })
        .collect::<Result<Vec<_>>>()?;
    let records = raws
        .into_par_iter()
        .map(|(line, text)| {
            let raw: RawRecord = serde_json::from_str(&text).map_err(|e| schema(line, e.to_string()))?;
            parse_record(raw, &header, &g, &ts, &spec).map_err(|e| schema(line, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, ts, records))
}

/// Writes `train.jsonl`, `validation.jsonl` and `test.jsonl` into `dir`.
pub fn write_split(dir: &Path, header: &DatasetHeader, split: &DatasetSplit, mode: TablesMode) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, records) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        write_dataset(&dir.join(format!("{name}.jsonl")), header, records, mode)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_iid_circuits, SamplerConfig};

    fn setup(count: usize) -> (ConnectivityGraph, TrackedErrorSet, Vec<Circuit>, HashMap<String, ValueRecord>) {
        let g = ConnectivityGraph::ring(4);
        let ts = TrackedErrorSet::build(&g, 2, 2).unwrap();
        let mut cfg = SamplerConfig::small_device(11);
        cfg.max_depth_by_width = [(1, 8), (2, 8), (3, 8), (4, 8)].into_iter().collect();
        let cs = sample_iid_circuits(&g, &cfg, count, "d").unwrap();
        let values = cs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let v = ValueRecord {
                    id: c.id.clone(),
                    metric: Metric::Fidelity,
                    value: 0.8 + 0.2 * (i as f64 / count as f64) + 1e-17 * i as f64,
                    method: None,
                    shots: None,
                };
                (c.id.clone(), v)
            })
            .collect();
        (g, ts, cs, values)
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (_, ts, cs, values) = setup(160);
        let opts = AssembleOptions::new(Metric::Fidelity, 0.0, 5);
        let a = assemble(&cs, &values, &ts, &opts).unwrap();
        let b = assemble(&cs, &values, &ts, &opts).unwrap();
        let ids = |s: &DatasetSplit| -> Vec<Vec<String>> {
            [&s.train, &s.validation, &s.test]
                .iter()
                .map(|v| v.iter().map(|r| r.id.clone()).collect())
                .collect()
        };
        assert_eq!(ids(&a), ids(&b));
        let n = a.len();
        assert_eq!(a.train.len(), (0.5625 * n as f64).round() as usize);
        assert_eq!(a.validation.len(), (0.1875 * n as f64).round() as usize);
        let mut all: Vec<String> = ids(&a).concat();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }

    #[test]
    fn threshold_and_duplicates() {
        let (_, ts, mut cs, mut values) = setup(40);
        let mut dup = cs[3].clone();
        dup.id = "dup".into();
        values.insert("dup".into(), ValueRecord { id: "dup".into(), ..values[&cs[3].id].clone() });
        cs.push(dup);
        let opts = AssembleOptions::new(Metric::Fidelity, 0.9, 1);
        let s = assemble(&cs, &values, &ts, &opts).unwrap();
        for r in s.train.iter().chain(&s.validation).chain(&s.test) {
            assert!(r.target >= 0.9);
        }
        let mut keys: Vec<_> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .map(|r| (r.circuit.active_qubits.clone(), r.circuit.layers.clone()))
            .collect();
        let before = keys.len();
        keys.sort_by_key(|k| format!("{k:?}"));
        keys.dedup();
        assert_eq!(keys.len(), before);

        let all_low = AssembleOptions::new(Metric::Fidelity, 2.0, 1);
        let s = assemble(&cs, &values, &ts, &all_low).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.warnings.len(), 1);

        values.remove(&cs[0].id);
        assert!(matches!(assemble(&cs, &values, &ts, &opts), Err(Error::MissingValue(_))));
    }

    #[test]
    fn file_roundtrip_both_modes() {
        let (_, ts, cs, values) = setup(100);
        let split = assemble(&cs, &values, &ts, &AssembleOptions::new(Metric::Fidelity, 0.0, 2)).unwrap();
        let records: Vec<_> = split.train.iter().chain(&split.validation).chain(&split.test).cloned().collect();
        let header = header_for(&ts, Metric::Fidelity, split.d_max);
        let dir = tempfile::tempdir().unwrap();
        for mode in [TablesMode::Inline, TablesMode::Recompute] {
            let path = dir.path().join("d.jsonl");
            write_dataset(&path, &header, &records, mode).unwrap();
            let (h, _, back) = read_dataset(&path).unwrap();
            assert_eq!(h, header);
            assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                assert_eq!(a.target.to_bits(), b.target.to_bits());
                assert_eq!(a.tensor, b.tensor);
                assert_eq!(a.tables, b.tables);
                assert_eq!(a.circuit.active_qubits, b.circuit.active_qubits);
                assert_eq!(a.circuit.depth(), b.circuit.depth());
            }
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        std::fs::write(
            &path,
            r#"{"schema":"qcap-dataset","version":2,"graph":"ring:4","hops":2,"max_weight":2,"metric":"fidelity","n_ch":11,"d_max":4}"#,
        )
        .unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::VersionMismatch { found: 2, .. })));
    }

    #[test]
    fn bad_record_reports_line() {
        let (_, ts, cs, values) = setup(5);
        let split = assemble(&cs, &values, &ts, &AssembleOptions::new(Metric::Fidelity, 0.0, 2)).unwrap();
        let header = header_for(&ts, Metric::Fidelity, split.d_max);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.jsonl");
        write_dataset(&path, &header, &split.train, TablesMode::Recompute).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"id\": 3}\n");
        std::fs::write(&path, text).unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains(&format!(":{}:", split.train.len() + 2)), "{err}");
    }
}
