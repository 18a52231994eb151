//! Propagation of tracked errors to the end of a circuit, and the closed-form
//! fidelity / success-probability head.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::clifford::{tableau_of_layer, CliffordTableau};
use crate::errgen::{ErrorGenerator, Kind, TrackedErrorSet};
use crate::error::{Error, Result};

/// Which figure of merit a prediction targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Process fidelity.
    Fidelity,
    /// Probability of observing the ideal bit string.
    Pst,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Fidelity => "fidelity",
            Metric::Pst => "pst",
        }
    }

    /// Whether an end-of-circuit error on this generator lowers the metric.
    pub fn counts(self, e: &ErrorGenerator) -> bool {
        match self {
            Metric::Fidelity => true,
            Metric::Pst => e.pauli.contains_xy(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity" => Ok(Metric::Fidelity),
            "pst" => Ok(Metric::Pst),
            _ => Err(Error::Config(format!("unknown metric `{s}` (fidelity|pst)"))),
        }
    }
}

/// Per-layer rates for every tracked generator: row `i` holds the rates of
/// the error channel following layer `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    depth: usize,
    k: usize,
    data: Vec<f64>,
}

impl RateMatrix {
    pub fn zeros(depth: usize, k: usize) -> Self {
        RateMatrix {
            depth,
            k,
            data: vec![0.0; depth * k],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("ragged rate matrix".into()));
        }
        Ok(RateMatrix {
            depth: rows.len(),
            k,
            data: rows.concat(),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.k + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.k + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Where each tracked error ends up: entry `(i, j)` is tracked generator `j`
/// occurring after layer `i`, conjugated through all later layers, as a
/// final generator and a sign.
///
/// Final generators are interned in `keys`; the table stores key indices.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationTables {
    depth: usize,
    k: usize,
    keys: Vec<ErrorGenerator>,
    perm: Vec<u32>,
    sign: Vec<i8>,
}

impl PropagationTables {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Distinct final generators, in order of first appearance.
    pub fn keys(&self) -> &[ErrorGenerator] {
        &self.keys
    }

    pub fn key_index(&self, i: usize, j: usize) -> usize {
        self.perm[i * self.k + j] as usize
    }

    pub fn perm(&self, i: usize, j: usize) -> &ErrorGenerator {
        &self.keys[self.key_index(i, j)]
    }

    pub fn sign(&self, i: usize, j: usize) -> i8 {
        self.sign[i * self.k + j]
    }

    pub fn key_row(&self, i: usize) -> &[u32] {
        &self.perm[i * self.k..(i + 1) * self.k]
    }

    pub fn sign_row(&self, i: usize) -> &[i8] {
        &self.sign[i * self.k..(i + 1) * self.k]
    }

    /// Key of tracked generator `j` itself (the last row is unpropagated).
    pub fn tracked_key(&self, j: usize) -> usize {
        self.key_index(self.depth - 1, j)
    }

    /// Rebuilds tables from explicit entries (e.g. read back from a dataset).
    pub fn from_entries(rows: &[Vec<(ErrorGenerator, i8)>]) -> Result<Self> {
        let depth = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut interner = Interner::default();
        let mut perm = vec![0u32; depth * k];
        let mut sign = vec![1i8; depth * k];
        // Interned back to front, matching `compute_propagation`.
        for (i, row) in rows.iter().enumerate().rev() {
            if row.len() != k {
                return Err(Error::DimensionMismatch("ragged propagation table".into()));
            }
            for (j, (e, s)) in row.iter().enumerate() {
                if *s != 1 && *s != -1 {
                    return Err(Error::DimensionMismatch(format!("sign entry {s} is not ±1")));
                }
                perm[i * k + j] = interner.intern(e);
                sign[i * k + j] = *s;
            }
        }
        Ok(PropagationTables {
            depth,
            k,
            keys: interner.keys,
            perm,
            sign,
        })
    }

    /// Adds `Σ_i sign·E[i][j]` into a dense per-key buffer (length
    /// `keys().len()`), skipping exactly-zero rates; `touched` marks keys that
    /// received any contribution.
    pub fn accumulate_dense(
        &self,
        e: &RateMatrix,
        measurement: Option<&[(usize, f64)]>,
        values: &mut [f64],
        touched: &mut [bool],
    ) -> Result<()> {
        if e.depth() != self.depth || e.k() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "rate matrix is {}x{}, tables are {}x{}",
                e.depth(),
                e.k(),
                self.depth,
                self.k
            )));
        }
        for i in 0..self.depth {
            let rates = e.row(i);
            let keys = self.key_row(i);
            let signs = self.sign_row(i);
            for j in 0..self.k {
                let r = rates[j];
                if r != 0.0 {
                    let key = keys[j] as usize;
                    values[key] += f64::from(signs[j]) * r;
                    touched[key] = true;
                }
            }
        }
        for &(j, r) in measurement.unwrap_or(&[]) {
            if j >= self.k {
                return Err(Error::DimensionMismatch(format!(
                    "measurement index {j} out of range for {} tracked errors",
                    self.k
                )));
            }
            if r != 0.0 {
                let key = self.tracked_key(j);
                values[key] += r;
                touched[key] = true;
            }
        }
        Ok(())
    }

    /// Metric value from a dense per-key buffer.
    pub fn head(&self, values: &[f64], metric: Metric) -> f64 {
        let mut loss = 0.0;
        for (key, &v) in self.keys.iter().zip(values) {
            if metric.counts(key) {
                loss += match key.kind {
                    Kind::S => v,
                    Kind::H => v * v,
                };
            }
        }
        1.0 - loss
    }
}

#[derive(Default)]
struct Interner {
    keys: Vec<ErrorGenerator>,
    index: HashMap<ErrorGenerator, u32>,
}

impl Interner {
    fn intern(&mut self, e: &ErrorGenerator) -> u32 {
        if let Some(&i) = self.index.get(e) {
            return i;
        }
        let i = self.keys.len() as u32;
        self.keys.push(e.clone());
        self.index.insert(e.clone(), i);
        i
    }
}

/// Builds the tables back to front, keeping the tableau of all layers after
/// the current one.
pub fn compute_propagation(c: &Circuit, ts: &TrackedErrorSet) -> Result<PropagationTables> {
    if c.n != ts.n() {
        return Err(Error::DimensionMismatch(format!(
            "circuit has {} qubits, tracked set {}",
            c.n,
            ts.n()
        )));
    }
    let depth = c.depth();
    let k = ts.len();
    let mut interner = Interner::default();
    let mut perm = vec![0u32; depth * k];
    let mut sign = vec![1i8; depth * k];
    let mut after = CliffordTableau::identity(c.n);
    for i in (0..depth).rev() {
        for (j, g) in ts.generators().iter().enumerate() {
            let image = after.conjugate_unsigned(&g.pauli);
            let key = ErrorGenerator::new(g.kind, image.pauli);
            perm[i * k + j] = interner.intern(&key);
            if g.kind == Kind::H && image.negative {
                sign[i * k + j] = -1;
            }
        }
        let layer = tableau_of_layer(&c.layers[i], c.n).map_err(|e| match e {
            Error::OverlappingGates { qubit, .. } => Error::OverlappingGates { layer: i, qubit },
            other => other,
        })?;
        after = CliffordTableau::compose(&after, &layer)?;
    }
    Ok(PropagationTables {
        depth,
        k,
        keys: interner.keys,
        perm,
        sign,
    })
}

/// Net end-of-circuit rate per generator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EndErrorVector {
    entries: BTreeMap<ErrorGenerator, f64>,
}

impl EndErrorVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, e: ErrorGenerator, rate: f64) {
        *self.entries.entry(e).or_insert(0.0) += rate;
    }

    pub fn get(&self, e: &ErrorGenerator) -> Option<f64> {
        self.entries.get(e).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ErrorGenerator, f64)> {
        self.entries.iter().map(|(e, &v)| (e, v))
    }

    /// True if a stochastic entry went negative (possible with learned rates).
    pub fn has_negative_stochastic(&self) -> bool {
        self.entries.iter().any(|(e, &v)| e.kind == Kind::S && v < 0.0)
    }
}

impl FromIterator<(ErrorGenerator, f64)> for EndErrorVector {
    fn from_iter<T: IntoIterator<Item = (ErrorGenerator, f64)>>(iter: T) -> Self {
        let mut v = EndErrorVector::new();
        for (e, r) in iter {
            v.add(e, r);
        }
        v
    }
}

/// Sums every propagated rate into its final generator. `measurement` pairs
/// are `(tracked index, rate)` added at the circuit end without propagation.
pub fn accumulate(
    e: &RateMatrix,
    tables: &PropagationTables,
    measurement: Option<&[(usize, f64)]>,
) -> Result<EndErrorVector> {
    let mut values = vec![0.0; tables.keys().len()];
    let mut touched = vec![false; tables.keys().len()];
    tables.accumulate_dense(e, measurement, &mut values, &mut touched)?;
    Ok(tables
        .keys()
        .iter()
        .zip(values.iter().zip(&touched))
        .filter(|(_, (_, &t))| t)
        .map(|(key, (&v, _))| (key.clone(), v))
        .collect())
}

fn head(v: &EndErrorVector, metric: Metric) -> f64 {
    1.0 - v
        .iter()
        .filter(|(e, _)| metric.counts(e))
        .map(|(e, r)| match e.kind {
            Kind::S => r,
            Kind::H => r * r,
        })
        .sum::<f64>()
}

/// `1 - Σ (s_P + θ_P²)` over all end errors.
pub fn fidelity_from(v: &EndErrorVector) -> f64 {
    head(v, Metric::Fidelity)
}

/// As [`fidelity_from`], restricted to errors with an X or Y letter.
pub fn pst_from(v: &EndErrorVector) -> f64 {
    head(v, Metric::Pst)
}

pub fn metric_from(v: &EndErrorVector, metric: Metric) -> f64 {
    head(v, metric)
}
