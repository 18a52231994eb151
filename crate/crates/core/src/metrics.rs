//! Regression metrics, Bayes factors, prediction tables and scatter plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictions are clipped into `[CLIP, 1 − CLIP]` before taking logs.
pub const CLIP: f64 = 1e-6;

/// Pairwise summation; the result does not depend on thread scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn check_pairs(a: &[f64], b: &[f64], needed: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions for {} targets", a.len(), b.len())));
    }
    if a.len() < needed {
        return Err(Error::TooFewPairs { needed, got: a.len() });
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pairs(pred, truth, 1)?;
    let abs: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    Ok(pairwise_sum(&abs) / abs.len() as f64)
}

pub fn pearson(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pairs(pred, truth, 2)?;
    let n = pred.len() as f64;
    let mp = pairwise_sum(pred) / n;
    let mt = pairwise_sum(truth) / n;
    let dp: Vec<f64> = pred.iter().map(|p| p - mp).collect();
    let dt: Vec<f64> = truth.iter().map(|t| t - mt).collect();
    let vp = pairwise_sum(&dp.iter().map(|d| d * d).collect::<Vec<_>>());
    let vt = pairwise_sum(&dt.iter().map(|d| d * d).collect::<Vec<_>>());
    if vp == 0.0 || vt == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let cov = pairwise_sum(&dp.iter().zip(&dt).map(|(a, b)| a * b).collect::<Vec<_>>());
    Ok((cov / (vp * vt).sqrt()).clamp(-1.0, 1.0))
}

fn log_likelihood(p: f64, shots: u64, successes: u64) -> f64 {
    let p = p.clamp(CLIP, 1.0 - CLIP);
    successes as f64 * p.ln() + (shots - successes) as f64 * (1.0 - p).ln()
}

/// `log10` of the likelihood ratio of predictor `a` over predictor `b` under
/// independent binomial shot counts `(shots, successes)` per record.
pub fn bayes_log10_factor(pred_a: &[f64], pred_b: &[f64], shots: &[(u64, u64)]) -> Result<f64> {
    check_pairs(pred_a, pred_b, 1)?;
    if shots.len() != pred_a.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} shot records for {} predictions",
            shots.len(),
            pred_a.len()
        )));
    }
    let terms: Vec<f64> = pred_a
        .iter()
        .zip(pred_b)
        .zip(shots)
        .map(|((&a, &b), &(n, k))| log_likelihood(a, n, k) - log_likelihood(b, n, k))
        .collect();
    Ok(pairwise_sum(&terms) / std::f64::consts::LN_10)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub target: f64,
    pub prediction: f64,
    pub abs_error: f64,
}

impl EvalRow {
    pub fn new(id: impl Into<String>, target: f64, prediction: f64) -> Self {
        EvalRow {
            id: id.into(),
            target,
            prediction,
            abs_error: (prediction - target).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub records: usize,
    pub mae: f64,
    /// Absent when either series is constant.
    pub pearson: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log10_bayes_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<String>,
    pub clip: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
}

impl EvalReport {
    pub fn from_rows(dataset: &str, model: &str, rows: &[EvalRow]) -> Result<Self> {
        let (pred, truth): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.prediction, r.target)).unzip();
        let pearson = match pearson(&pred, &truth) {
            Ok(r) => Some(r),
            Err(Error::ConstantSeries | Error::TooFewPairs { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(EvalReport {
            dataset: dataset.into(),
            model: model.into(),
            records: rows.len(),
            mae: mae(&pred, &truth)?,
            pearson,
            log10_bayes_factor: None,
            comparison: None,
            clip: CLIP,
            runtime_s: None,
        })
    }
}

pub const CSV_HEADER: &str = "id,target,prediction,abs_error";

pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.id, r.target, r.prediction, r.abs_error);
    }
    out
}

pub fn write_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    std::fs::write(path, rows_to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Reads a prediction table. Requires `id` and `prediction` columns; a
/// missing `target` column reads as NaN.
pub fn read_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema = |line: usize, msg: String| Error::Schema {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| schema(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| cols.iter().position(|c| *c == name);
    let id_c = col("id").ok_or_else(|| schema(1, "missing `id` column".into()))?;
    let pred_c = col("prediction").ok_or_else(|| schema(1, "missing `prediction` column".into()))?;
    let target_c = col("target");
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(schema(i + 1, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let num = |c: usize| {
            fields[c]
                .parse::<f64>()
                .map_err(|_| schema(i + 1, format!("`{}` is not a number", fields[c])))
        };
        let target = match target_c {
            Some(c) => num(c)?,
            None => f64::NAN,
        };
        rows.push(EvalRow::new(fields[id_c], target, num(pred_c)?));
    }
    Ok(rows)
}

/// Static scatter of target against prediction with the identity line.
pub fn scatter_svg(rows: &[EvalRow], title: &str) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 56.0;
    let finite = rows
        .iter()
        .flat_map(|r| [r.target, r.prediction])
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5e-3;
        hi += 0.5e-3;
    }
    let span = hi - lo;
    let x = |v: f64| PAD + (v - lo) / span * (SIZE - 2.0 * PAD);
    let y = |v: f64| SIZE - PAD - (v - lo) / span * (SIZE - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        w = SIZE - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        x(lo),
        y(lo),
        x(hi),
        y(hi)
    );
    for r in rows.iter().filter(|r| r.target.is_finite() && r.prediction.is_finite()) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f77b4" fill-opacity="0.6"/>"##,
            x(r.target),
            y(r.prediction)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        SIZE / 2.0,
        PAD / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">target</text>"#,
        SIZE / 2.0,
        SIZE - PAD / 3.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 {} {})">prediction</text>"#,
        PAD / 3.0,
        SIZE / 2.0,
        PAD / 3.0,
        SIZE / 2.0
    );
    for (v, anchor) in [(lo, "start"), (hi, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="{anchor}" font-size="10">{v:.4}</text>"#,
            x(v),
            SIZE - PAD + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
