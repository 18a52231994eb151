//! End-to-end runs: sample a device error model and circuits, simulate
//! ground truth, assemble a dataset, train, evaluate, and write artifacts.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{write_circuits, Circuit};
use crate::dataset::{assemble, header_for, make_record, write_split, write_values, AssembleOptions, DatasetRecord, DatasetSplit, TablesMode, ValueRecord};
use crate::encoding::ChannelSpec;
use crate::errgen::TrackedErrorSet;
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::graph::ConnectivityGraph;
use crate::metrics::{write_csv, scatter_svg, EvalReport, EvalRow};
use crate::nn::{build_model, checkpoint, train, FilterSpec, QpaModel, TrainConfig, TrainHistory, DEFAULT_HIDDEN};
use crate::noise::{sample_coherent_model, sample_weight1_model, ErrorModel, DEFAULT_MAX_H, DEFAULT_MAX_S, DEFAULT_MAX_STRENGTH};
use crate::propagation::Metric;
use crate::sampler::{sample_iid_circuits, sample_mirror_circuits, SamplerConfig};
use crate::sim::{ExactSimulator, FirstOrderSimulator};

/// Independent sub-seed for one stage of a run.
pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng.next_u64()
}

const STAGE_MODEL: u64 = 1;
const STAGE_SPLIT: u64 = 2;
const STAGE_INIT: u64 = 3;
const STAGE_TRAIN: u64 = 4;
const STAGE_MIRROR: u64 = 5;
const STAGE_CIRCUITS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    Exact,
    FirstOrder,
}

impl SimMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMethod::Exact => "exact",
            SimMethod::FirstOrder => "first-order",
        }
    }
}

/// Simulates every circuit. First-order simulation needs the tracked set the
/// model's generators live in.
pub fn simulate_values(
    circuits: &[Circuit],
    model: &ErrorModel,
    metric: Metric,
    method: SimMethod,
    ts: Option<&TrackedErrorSet>,
) -> Result<Vec<ValueRecord>> {
    let values: Vec<f64> = match method {
        SimMethod::Exact => {
            let sim = ExactSimulator::new(model);
            circuits
                .par_iter()
                .map(|c| match metric {
                    Metric::Fidelity => sim.fidelity(c),
                    Metric::Pst => sim.pst(c),
                })
                .collect::<Result<_>>()?
        }
        SimMethod::FirstOrder => {
            let ts = ts.ok_or_else(|| Error::Config("first-order simulation needs a tracked error set".into()))?;
            let sim = FirstOrderSimulator::new(model, ts)?;
            circuits
                .par_iter()
                .map(|c| match metric {
                    Metric::Fidelity => sim.fidelity(c),
                    Metric::Pst => sim.pst(c),
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(circuits
        .iter()
        .zip(values)
        .map(|(c, value)| ValueRecord {
            id: c.id.clone(),
            metric,
            value,
            method: Some(method.as_str().into()),
            shots: None,
        })
        .collect())
}

/// Draws `(shots, successes)` for every value from a binomial with the
/// value (clamped to `[0, 1]`) as success probability.
pub fn sample_shots(values: &mut [ValueRecord], shots: u64, seed: u64) -> Result<()> {
    for (i, v) in values.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let p = v.value.clamp(0.0, 1.0);
        let dist = Binomial::new(shots, p).map_err(|e| Error::Numerical(e.to_string()))?;
        v.shots = Some((shots, dist.sample(&mut rng)));
    }
    Ok(())
}

/// Samples rounds of circuits until `target` of them reach the threshold
/// (or `max_rounds` rounds have been drawn).
fn sample_until(
    g: &ConnectivityGraph,
    cfg: &SamplerConfig,
    target: usize,
    threshold: f64,
    simulate: impl Fn(&[Circuit]) -> Result<Vec<ValueRecord>>,
) -> Result<(Vec<Circuit>, Vec<ValueRecord>)> {
    const MAX_ROUNDS: u64 = 20;
    let mut circuits = Vec::new();
    let mut values = Vec::new();
    let mut kept = 0;
    for round in 0..MAX_ROUNDS {
        if kept >= target {
            break;
        }
        let mut round_cfg = cfg.clone();
        round_cfg.seed = derive_seed(cfg.seed, STAGE_CIRCUITS + round);
        let batch = sample_iid_circuits(g, &round_cfg, target - kept, &format!("r{round}-"))?;
        let vals = simulate(&batch)?;
        kept += vals.iter().filter(|v| v.value >= threshold).count();
        circuits.extend(batch);
        values.extend(vals);
    }
    if kept < target {
        log::warn!("only {kept} of {target} requested circuits reach the threshold {threshold}");
    }
    Ok((circuits, values))
}

fn index_values(values: &[ValueRecord]) -> HashMap<String, ValueRecord> {
    values.iter().map(|v| (v.id.clone(), v.clone())).collect()
}

fn eval_rows(model: &QpaModel, records: &[DatasetRecord]) -> Result<Vec<EvalRow>> {
    let preds = model.predict_batch(records)?;
    Ok(records
        .iter()
        .zip(preds)
        .map(|(r, p)| EvalRow::new(r.id.clone(), r.target, p))
        .collect())
}

/// Summary of a reproduction run. Contains no timings, so reruns with the
/// same seed produce identical files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub run: String,
    pub seed: u64,
    pub graph: String,
    pub circuits_sampled: usize,
    pub retained: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub d_max: usize,
    pub threshold: f64,
    pub tracked_errors: usize,
    pub n_params: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub test_report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_report: Option<EvalReport>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    pub simulate_s: f64,
    pub assemble_s: f64,
    pub train_s: f64,
    pub evaluate_s: f64,
    pub total_s: f64,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub timings: Timings,
    pub model: QpaModel,
    pub history: TrainHistory,
    pub split: DatasetSplit,
    pub error_model: ErrorModel,
    pub test_rows: Vec<EvalRow>,
    pub mirror_rows: Option<Vec<EvalRow>>,
}

/// The 4-qubit ring run with local coherent errors and exact fidelities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sim4Config {
    pub seed: u64,
    /// Circuits wanted after filtering.
    pub circuits: usize,
    pub mirror_circuits: usize,
    pub threshold: f64,
    pub max_strength: f64,
    pub hops: usize,
    pub filter_hops: usize,
    pub widths: Vec<usize>,
    pub train: TrainConfig,
}

impl Sim4Config {
    pub fn new(seed: u64) -> Self {
        Sim4Config {
            seed,
            circuits: 5000,
            mirror_circuits: 750,
            threshold: 0.85,
            max_strength: DEFAULT_MAX_STRENGTH,
            hops: 2,
            filter_hops: 1,
            widths: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig {
                seed: derive_seed(seed, STAGE_TRAIN),
                ..TrainConfig::default()
            },
        }
    }
}

/// The ring run with qubit-independent weight-1 errors and first-order
/// fidelities, on full-width circuits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RingConfig {
    pub seed: u64,
    pub n: usize,
    pub circuits: usize,
    pub max_depth: usize,
    pub threshold: f64,
    pub max_s: f64,
    pub max_h: f64,
    pub filter_hops: usize,
    pub widths: Vec<usize>,
    pub train: TrainConfig,
}

impl RingConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        RingConfig {
            seed,
            n,
            circuits: 5000,
            max_depth: 22,
            threshold: 0.91,
            max_s: DEFAULT_MAX_S,
            max_h: DEFAULT_MAX_H,
            filter_hops: 1,
            widths: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig {
                seed: derive_seed(seed, STAGE_TRAIN),
                ..TrainConfig::default()
            },
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    run: &str,
    seed: u64,
    g: &ConnectivityGraph,
    ts: &TrackedErrorSet,
    error_model: ErrorModel,
    circuits: usize,
    split: DatasetSplit,
    model: QpaModel,
    train_cfg: &TrainConfig,
    mut timings: Timings,
    start: Instant,
) -> Result<RunOutcome> {
    let t = Instant::now();
    let (model, history) = train(model, &split, train_cfg)?;
    timings.train_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let test_rows = eval_rows(&model, &split.test)?;
    let test_report = EvalReport::from_rows(&format!("{run}/test"), "checkpoint.json", &test_rows)?;
    timings.evaluate_s = t.elapsed().as_secs_f64();
    timings.total_s = start.elapsed().as_secs_f64();
    let report = RunReport {
        run: run.into(),
        seed,
        graph: g.name().into(),
        circuits_sampled: circuits,
        retained: split.len(),
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
        d_max: split.d_max,
        threshold: split.threshold,
        tracked_errors: ts.len(),
        n_params: model.n_params(),
        epochs_run: history.epochs.len(),
        best_epoch: history.best_epoch,
        stopped_early: history.stopped_early,
        test_report,
        mirror_report: None,
        warnings: split.warnings.clone(),
    };
    Ok(RunOutcome {
        report,
        timings,
        model,
        history,
        split,
        error_model,
        test_rows,
        mirror_rows: None,
    })
}

pub fn reproduce_sim4(cfg: &Sim4Config) -> Result<RunOutcome> {
    let start = Instant::now();
    let g = ConnectivityGraph::ring(4);
    let ts = TrackedErrorSet::build(&g, cfg.hops, 2)?;
    let spec = ChannelSpec::for_graph(&g);
    let mut model_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STAGE_MODEL));
    let error_model = sample_coherent_model(&g, &Gate::ALL, cfg.max_strength, &mut model_rng)?;
    let sampler = SamplerConfig::small_device(cfg.seed);
    let mut timings = Timings::default();
    let t = Instant::now();
    let (circuits, values) = sample_until(&g, &sampler, cfg.circuits, cfg.threshold, |cs| {
        simulate_values(cs, &error_model, Metric::Fidelity, SimMethod::Exact, None)
    })?;
    timings.simulate_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let opts = AssembleOptions::new(Metric::Fidelity, cfg.threshold, derive_seed(cfg.seed, STAGE_SPLIT));
    let split = assemble(&circuits, &index_values(&values), &ts, &opts)?;
    timings.assemble_s = t.elapsed().as_secs_f64();
    let filter = FilterSpec::build(&ts, cfg.filter_hops, cfg.filter_hops);
    let model = build_model(&ts, &spec, filter, Metric::Fidelity, &cfg.widths, derive_seed(cfg.seed, STAGE_INIT))?;
    let mut out = finish("sim4", cfg.seed, &g, &ts, error_model, circuits.len(), split, model, &cfg.train, timings, start)?;

    if cfg.mirror_circuits > 0 {
        let t = Instant::now();
        let seen: HashSet<(&[usize], &[crate::circuit::Layer])> =
            circuits.iter().map(|c| (c.active_qubits.as_slice(), c.layers.as_slice())).collect();
        let mut mcfg = SamplerConfig::small_device(derive_seed(cfg.seed, STAGE_MIRROR));
        mcfg.widths = sampler.widths;
        let mirrors: Vec<Circuit> = sample_mirror_circuits(&g, &mcfg, cfg.mirror_circuits, "m")?
            .into_iter()
            .filter(|c| !seen.contains(&(c.active_qubits.as_slice(), c.layers.as_slice())))
            .collect();
        let mvals = simulate_values(&mirrors, &out.error_model, Metric::Fidelity, SimMethod::Exact, None)?;
        let d_max = mirrors.iter().map(Circuit::depth).max().unwrap_or(1);
        let records = mirrors
            .par_iter()
            .zip(&mvals)
            .map(|(c, v)| make_record(c, &ts, &spec, d_max, Metric::Fidelity, v.value, None))
            .collect::<Result<Vec<_>>>()?;
        let rows = eval_rows(&out.model, &records)?;
        out.report.mirror_report = Some(EvalReport::from_rows("sim4/mirror", "checkpoint.json", &rows)?);
        out.mirror_rows = Some(rows);
        out.timings.evaluate_s += t.elapsed().as_secs_f64();
        out.timings.total_s = start.elapsed().as_secs_f64();
    }
    Ok(out)
}

pub fn reproduce_ring(cfg: &RingConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let g = ConnectivityGraph::ring(cfg.n);
    let ts = TrackedErrorSet::build(&g, 1, 1)?;
    let spec = ChannelSpec::for_graph(&g);
    let mut model_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STAGE_MODEL));
    let error_model = sample_weight1_model(&g, &Gate::ALL, cfg.max_s, cfg.max_h, &mut model_rng)?;
    let sampler = SamplerConfig::fixed_width(cfg.n, cfg.max_depth, cfg.seed);
    let mut timings = Timings::default();
    let t = Instant::now();
    let (circuits, values) = sample_until(&g, &sampler, cfg.circuits, cfg.threshold, |cs| {
        simulate_values(cs, &error_model, Metric::Fidelity, SimMethod::FirstOrder, Some(&ts))
    })?;
    timings.simulate_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let mut opts = AssembleOptions::new(Metric::Fidelity, cfg.threshold, derive_seed(cfg.seed, STAGE_SPLIT));
    opts.d_max = Some(cfg.max_depth);
    let split = assemble(&circuits, &index_values(&values), &ts, &opts)?;
    timings.assemble_s = t.elapsed().as_secs_f64();
    let filter = FilterSpec::build(&ts, cfg.filter_hops, cfg.filter_hops);
    let model = build_model(&ts, &spec, filter, Metric::Fidelity, &cfg.widths, derive_seed(cfg.seed, STAGE_INIT))?;
    finish(
        &format!("ring{}", cfg.n),
        cfg.seed,
        &g,
        &ts,
        error_model,
        circuits.len(),
        split,
        model,
        &cfg.train,
        timings,
        start,
    )
}

/// Writes every artifact of a run into `dir`:
/// `error_model.json`, `dataset/{train,validation,test}.jsonl`,
/// `checkpoint.json`, `test_predictions.csv`, `test_scatter.svg`,
/// `report.json`, `timings.json`, and the mirror counterparts when present.
pub fn write_run(dir: &Path, out: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    out.error_model.save(&dir.join("error_model.json"))?;
    let header = header_for(&out.model.ts, out.model.metric, out.split.d_max);
    write_split(&dir.join("dataset"), &header, &out.split, TablesMode::Recompute)?;
    checkpoint::save(&dir.join("checkpoint.json"), &out.model, &out.history)?;
    write_csv(&dir.join("test_predictions.csv"), &out.test_rows)?;
    write("test_scatter.svg", scatter_svg(&out.test_rows, &format!("{} test set", out.report.run)))?;
    if let Some(rows) = &out.mirror_rows {
        write_csv(&dir.join("mirror_predictions.csv"), rows)?;
        write("mirror_scatter.svg", scatter_svg(rows, &format!("{} mirror circuits", out.report.run)))?;
    }
    write("report.json", serde_json::to_string_pretty(&out.report)? + "\n")?;
    write("timings.json", serde_json::to_string_pretty(&out.timings)? + "\n")
}

/// Writes sampled circuits and their values as the two line-delimited files
/// the command-line tool exchanges.
pub fn write_circuits_and_values(dir: &Path, circuits: &[Circuit], values: &[ValueRecord]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_circuits(&dir.join("circuits.jsonl"), circuits)?;
    write_values(&dir.join("values.jsonl"), values)
}
