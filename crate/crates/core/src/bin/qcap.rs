use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use qcap::circuit::{read_circuits, write_circuits, Circuit};
use qcap::dataset::{
    assemble, header_for, read_dataset, read_values, write_split, write_values, AssembleOptions, TablesMode, ValueRecord,
    DEFAULT_FRACTIONS,
};
use qcap::encoding::ChannelSpec;
use qcap::errgen::TrackedErrorSet;
use qcap::gate::Gate;
use qcap::graph::ConnectivityGraph;
use qcap::metrics::{bayes_log10_factor, read_csv, scatter_svg, write_csv, EvalReport, EvalRow};
use qcap::nn::{build_model, checkpoint, train, FilterSpec, TrainConfig};
use qcap::noise::{sample_coherent_model, sample_weight1_model, ErrorModel, DEFAULT_MAX_H, DEFAULT_MAX_S, DEFAULT_MAX_STRENGTH};
use qcap::pipeline::{reproduce_ring, reproduce_sim4, sample_shots, simulate_values, write_run, RingConfig, SimMethod, Sim4Config};
use qcap::propagation::Metric;
use qcap::sampler::{sample_iid_circuits, sample_mirror_circuits, SamplerConfig};
use qcap::{Error, Result};

#[derive(Parser)]
#[command(name = "qcap", version, about = "Capability models for noisy Clifford circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a device error model.
    GenModel(GenModel),
    /// Sample random i.i.d.-layer or mirror circuits.
    GenCircuits(GenCircuits),
    /// Simulate circuits under an error model.
    Simulate(Simulate),
    /// Filter, deduplicate, split and encode a dataset.
    Encode(Encode),
    /// Train a model on an encoded dataset.
    Train(Train),
    /// Predict with a trained checkpoint.
    Predict(Predict),
    /// Compare predictions with ground truth.
    Evaluate(Evaluate),
    /// 4-qubit ring run with coherent errors and exact fidelities.
    ReproduceSim4(ReproduceSim4),
    /// Full-width ring run with weight-1 errors and first-order fidelities.
    ReproduceRing100(ReproduceRing),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Coherent,
    Weight1,
}

#[derive(Clone, Copy, ValueEnum)]
enum CircuitKindArg {
    Iid,
    Mirror,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Fidelity,
    Pst,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Fidelity => Metric::Fidelity,
            MetricArg::Pst => Metric::Pst,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    FirstOrder,
}

#[derive(Args)]
struct GenModel {
    /// `ring:<n>`, `line:<n>`, `tbar:5`, `bowtie:5`, or an edge-list file.
    #[arg(long)]
    graph: String,
    #[arg(long, value_enum, default_value = "coherent")]
    kind: ModelKind,
    #[arg(long, default_value_t = DEFAULT_MAX_STRENGTH)]
    max_strength: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_S)]
    max_s: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_H)]
    max_h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenCircuits {
    #[arg(long)]
    graph: String,
    #[arg(long, value_enum, default_value = "iid")]
    kind: CircuitKindArg,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    min_width: Option<usize>,
    #[arg(long)]
    max_width: Option<usize>,
    /// Depth cap for every width (default: 180, 90, 60, 45 for widths 1-4).
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value = "c")]
    prefix: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Simulate {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    circuits: PathBuf,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long, value_enum, default_value = "fidelity")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    /// Tracked-set parameters for first-order simulation.
    #[arg(long, default_value_t = 1)]
    hops: usize,
    #[arg(long, default_value_t = 1)]
    max_weight: usize,
    /// Sample this many binomial shots per circuit.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Encode {
    #[arg(long)]
    circuits: PathBuf,
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    graph: String,
    #[arg(long, default_value_t = 2)]
    hops: usize,
    #[arg(long, default_value_t = 2)]
    max_weight: usize,
    #[arg(long, value_enum, default_value = "fidelity")]
    metric: MetricArg,
    #[arg(long, default_value_t = 0.85)]
    threshold: f64,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    fractions: Option<Vec<f64>>,
    #[arg(long)]
    d_max: Option<usize>,
    /// Store propagation tables in every record instead of recomputing them
    /// on load.
    #[arg(long)]
    inline_tables: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `train.jsonl`, `validation.jsonl`, `test.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Train {
    /// Directory written by `encode`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    filter_hops: usize,
    #[arg(long, default_value_t = 1)]
    meas_filter_hops: usize,
    #[arg(long, value_delimiter = ',', default_value = "30,20,10,5,5,1")]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = qcap::nn::DEFAULT_SCALE)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Predict {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset file (one split).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Evaluate {
    /// Prediction CSV (`id,...,prediction,...`).
    #[arg(long)]
    pred: PathBuf,
    /// Dataset file or values file with the true values.
    #[arg(long)]
    truth: PathBuf,
    /// Second prediction CSV; reports the log10 Bayes factor of `--pred`
    /// over it (needs shot counts).
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Where to write the joined per-record table.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunOverrides {
    #[arg(long)]
    circuits: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args)]
struct ReproduceSim4 {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mirror_circuits: Option<usize>,
    #[command(flatten)]
    overrides: RunOverrides,
}

#[derive(Args)]
struct ReproduceRing {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Ring size.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[command(flatten)]
    overrides: RunOverrides,
}

fn graph_for(spec: Option<&str>, circuits: &[Circuit]) -> Result<ConnectivityGraph> {
    match spec {
        Some(s) => ConnectivityGraph::from_spec(s),
        None => {
            let name = circuits
                .first()
                .map(|c| c.graph.clone())
                .ok_or_else(|| Error::Config("no circuits and no --graph".into()))?;
            ConnectivityGraph::from_spec(&name)
        }
    }
}

fn gen_model(a: GenModel) -> Result<serde_json::Value> {
    let g = ConnectivityGraph::from_spec(&a.graph)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let model = match a.kind {
        ModelKind::Coherent => sample_coherent_model(&g, &Gate::ALL, a.max_strength, &mut rng)?,
        ModelKind::Weight1 => sample_weight1_model(&g, &Gate::ALL, a.max_s, a.max_h, &mut rng)?,
    };
    model.save(&a.out)?;
    Ok(json!({
        "command": "gen-model",
        "graph": g.name(),
        "entries": model.entries().count(),
        "seed": a.seed,
        "out": a.out,
    }))
}

fn gen_circuits(a: GenCircuits) -> Result<serde_json::Value> {
    let g = ConnectivityGraph::from_spec(&a.graph)?;
    let mut cfg = if g.n() <= 4 {
        SamplerConfig::small_device(a.seed)
    } else {
        SamplerConfig::fixed_width(g.n(), a.max_depth.unwrap_or(22), a.seed)
    };
    let lo = a.min_width.unwrap_or(cfg.widths.0);
    let hi = a.max_width.unwrap_or(cfg.widths.1.min(g.n()).max(lo));
    cfg.widths = (lo, hi);
    let caps = cfg.max_depth_by_width.clone();
    cfg.max_depth_by_width = (lo..=hi)
        .map(|w| (w, a.max_depth.or_else(|| caps.get(&w).copied()).unwrap_or(22)))
        .collect();
    let circuits = match a.kind {
        CircuitKindArg::Iid => sample_iid_circuits(&g, &cfg, a.count, &a.prefix)?,
        CircuitKindArg::Mirror => sample_mirror_circuits(&g, &cfg, a.count, &a.prefix)?,
    };
    write_circuits(&a.out, &circuits)?;
    let max_depth = circuits.iter().map(Circuit::depth).max().unwrap_or(0);
    Ok(json!({
        "command": "gen-circuits",
        "graph": g.name(),
        "count": circuits.len(),
        "widths": [lo, hi],
        "max_depth": max_depth,
        "seed": a.seed,
        "out": a.out,
    }))
}

fn simulate(a: Simulate) -> Result<serde_json::Value> {
    let model = ErrorModel::load(&a.model)?;
    let circuits = read_circuits(&a.circuits, None)?;
    let g = graph_for(a.graph.as_deref(), &circuits)?;
    for c in &circuits {
        c.validate(&g)?;
    }
    let (method, ts) = match a.method {
        MethodArg::Exact => (SimMethod::Exact, None),
        MethodArg::FirstOrder => (SimMethod::FirstOrder, Some(TrackedErrorSet::build(&g, a.hops, a.max_weight)?)),
    };
    let mut values = simulate_values(&circuits, &model, a.metric.into(), method, ts.as_ref())?;
    if let Some(n) = a.shots {
        sample_shots(&mut values, n, a.seed)?;
    }
    write_values(&a.out, &values)?;
    let mean = values.iter().map(|v| v.value).sum::<f64>() / values.len().max(1) as f64;
    Ok(json!({
        "command": "simulate",
        "method": method.as_str(),
        "metric": Metric::from(a.metric).as_str(),
        "circuits": values.len(),
        "mean_value": mean,
        "shots": a.shots,
        "seed": a.seed,
        "out": a.out,
    }))
}

fn encode(a: Encode) -> Result<serde_json::Value> {
    let g = ConnectivityGraph::from_spec(&a.graph)?;
    let circuits = read_circuits(&a.circuits, Some(&g))?;
    let values: HashMap<String, ValueRecord> = read_values(&a.values)?
        .into_iter()
        .map(|v| (v.id.clone(), v))
        .collect();
    let ts = TrackedErrorSet::build(&g, a.hops, a.max_weight)?;
    let metric: Metric = a.metric.into();
    let mut opts = AssembleOptions::new(metric, a.threshold, a.seed);
    opts.d_max = a.d_max;
    if let Some(f) = a.fractions {
        opts.fractions = [f[0], f[1], f[2]];
    }
    let split = assemble(&circuits, &values, &ts, &opts)?;
    let mode = if a.inline_tables { TablesMode::Inline } else { TablesMode::Recompute };
    write_split(&a.out, &header_for(&ts, metric, split.d_max), &split, mode)?;
    Ok(json!({
        "command": "encode",
        "graph": g.name(),
        "tracked_errors": ts.len(),
        "train": split.train.len(),
        "validation": split.validation.len(),
        "test": split.test.len(),
        "d_max": split.d_max,
        "fractions": split.fractions,
        "threshold": split.threshold,
        "warnings": split.warnings,
        "seed": a.seed,
        "out": a.out,
    }))
}

fn train_cmd(a: Train) -> Result<serde_json::Value> {
    let (header, ts, train_set) = read_dataset(&a.data.join("train.jsonl"))?;
    let validation = match a.data.join("validation.jsonl") {
        p if p.exists() => read_dataset(&p)?.2,
        _ => Vec::new(),
    };
    let spec = ChannelSpec::for_graph(ts.graph());
    let filter = FilterSpec::build(&ts, a.filter_hops, a.meas_filter_hops);
    let mut model = build_model(&ts, &spec, filter, header.metric, &a.widths, a.seed)?;
    model.scale = a.scale;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let split = qcap::dataset::DatasetSplit {
        train: train_set,
        validation,
        test: Vec::new(),
        fractions: DEFAULT_FRACTIONS,
        threshold: 0.0,
        seed: a.seed,
        d_max: header.d_max,
        warnings: Vec::new(),
    };
    let start = Instant::now();
    let (model, history) = train(model, &split, &cfg)?;
    checkpoint::save(&a.out, &model, &history)?;
    Ok(json!({
        "command": "train",
        "tracked_errors": ts.len(),
        "n_params": model.n_params(),
        "epochs_run": history.epochs.len(),
        "best_epoch": history.best_epoch,
        "best_validation_loss": history.best_validation_loss,
        "stopped_early": history.stopped_early,
        "runtime_s": start.elapsed().as_secs_f64(),
        "seed": a.seed,
        "out": a.out,
    }))
}

fn predict(a: Predict) -> Result<serde_json::Value> {
    let (model, _) = checkpoint::load(&a.checkpoint)?;
    let (_, _, records) = read_dataset(&a.data)?;
    let preds = model.predict_batch(&records)?;
    let rows: Vec<EvalRow> = records
        .iter()
        .zip(&preds)
        .map(|(r, &p)| EvalRow::new(r.id.clone(), r.target, p))
        .collect();
    write_csv(&a.out, &rows)?;
    Ok(json!({
        "command": "predict",
        "records": rows.len(),
        "seed": a.seed,
        "out": a.out,
    }))
}

/// True values and optional shot counts by id, from a dataset or values file.
fn read_truth(path: &Path) -> Result<Vec<(String, f64, Option<(u64, u64)>)>> {
    let first = std::fs::read_to_string(path)
        .map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?
        .lines()
        .next()
        .unwrap_or("")
        .to_string();
    if first.contains(qcap::dataset::SCHEMA) {
        let (_, _, records) = read_dataset(path)?;
        Ok(records.into_iter().map(|r| (r.id, r.target, r.shots)).collect())
    } else {
        Ok(read_values(path)?.into_iter().map(|v| (v.id, v.value, v.shots)).collect())
    }
}

fn evaluate(a: Evaluate) -> Result<serde_json::Value> {
    let start = Instant::now();
    let truth = read_truth(&a.truth)?;
    let preds: HashMap<String, f64> = read_csv(&a.pred)?.into_iter().map(|r| (r.id, r.prediction)).collect();
    let rows = truth
        .iter()
        .map(|(id, t, _)| {
            let p = preds.get(id).ok_or_else(|| Error::MissingValue(format!("{id} (in {})", a.pred.display())))?;
            Ok(EvalRow::new(id.clone(), *t, *p))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport::from_rows(&a.truth.display().to_string(), &a.pred.display().to_string(), &rows)?;
    if let Some(other) = &a.compare {
        let shots = truth
            .iter()
            .map(|(id, _, s)| s.ok_or_else(|| Error::MissingShots(id.clone())))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| match e {
                Error::MissingShots(id) => Error::Config(format!(
                    "Bayes factors need shot counts; record `{id}` has none (fidelity datasets carry no shots)"
                )),
                e => e,
            })?;
        let other_preds: HashMap<String, f64> = read_csv(other)?.into_iter().map(|r| (r.id, r.prediction)).collect();
        let b = truth
            .iter()
            .map(|(id, _, _)| {
                other_preds
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::MissingValue(format!("{id} (in {})", other.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        let a_preds: Vec<f64> = rows.iter().map(|r| r.prediction).collect();
        report.log10_bayes_factor = Some(bayes_log10_factor(&a_preds, &b, &shots)?);
        report.comparison = Some(other.display().to_string());
    }
    if let Some(path) = &a.scatter {
        std::fs::write(path, scatter_svg(&rows, &report.dataset)).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    if let Some(path) = &a.csv {
        write_csv(path, &rows)?;
    }
    report.runtime_s = Some(start.elapsed().as_secs_f64());
    let value = serde_json::to_value(&report)?;
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&value)? + "\n").map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(value)
}

fn apply_overrides(o: &RunOverrides, circuits: &mut usize, train: &mut TrainConfig) {
    if let Some(c) = o.circuits {
        *circuits = c;
    }
    if let Some(e) = o.max_epochs {
        train.max_epochs = e;
    }
    if let Some(p) = o.patience {
        train.patience = p;
    }
}

fn reproduce_sim4_cmd(a: ReproduceSim4) -> Result<serde_json::Value> {
    let mut cfg = Sim4Config::new(a.seed);
    apply_overrides(&a.overrides, &mut cfg.circuits, &mut cfg.train);
    if let Some(m) = a.mirror_circuits {
        cfg.mirror_circuits = m;
    }
    let out = reproduce_sim4(&cfg)?;
    write_run(&a.out, &out)?;
    Ok(json!({
        "command": "reproduce-sim4",
        "report": out.report,
        "timings": out.timings,
        "out": a.out,
    }))
}

fn reproduce_ring_cmd(a: ReproduceRing) -> Result<serde_json::Value> {
    let mut cfg = RingConfig::new(a.n, a.seed);
    apply_overrides(&a.overrides, &mut cfg.circuits, &mut cfg.train);
    let out = reproduce_ring(&cfg)?;
    write_run(&a.out, &out)?;
    Ok(json!({
        "command": "reproduce-ring100",
        "report": out.report,
        "timings": out.timings,
        "out": a.out,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenModel(a) => gen_model(a),
        Command::GenCircuits(a) => gen_circuits(a),
        Command::Simulate(a) => simulate(a),
        Command::Encode(a) => encode(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::ReproduceSim4(a) => reproduce_sim4_cmd(a),
        Command::ReproduceRing100(a) => reproduce_ring_cmd(a),
    };
    match result {
        Ok(summary) => {
            // A closed pipe (`qcap ... | head`) is not an error.
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
