//! First-order (linearized) fidelity simulation; scales to large devices.

use std::collections::HashMap;

use crate::circuit::{Circuit, GateOp};
use crate::errgen::TrackedErrorSet;
use crate::error::{Error, Result};
use crate::noise::{ErrorModel, GateKey, Placement};
use crate::propagation::{accumulate, compute_propagation, metric_from, EndErrorVector, Metric, RateMatrix};

/// An error model resolved against a tracked set: each gate entry becomes a
/// list of `(tracked index, rate)`.
pub struct FirstOrderSimulator<'a> {
    ts: &'a TrackedErrorSet,
    rates: HashMap<GateKey, Vec<(usize, f64)>>,
    measurement: Option<Vec<(usize, f64)>>,
}

impl<'a> FirstOrderSimulator<'a> {
    /// Fails if the model uses a generator outside the tracked set.
    pub fn new(model: &ErrorModel, ts: &'a TrackedErrorSet) -> Result<Self> {
        if model.n() != ts.n() {
            return Err(Error::DimensionMismatch(format!(
                "error model has {} qubits, tracked set {}",
                model.n(),
                ts.n()
            )));
        }
        let resolve = |v: &[(crate::errgen::ErrorGenerator, f64)]| -> Result<Vec<(usize, f64)>> {
            v.iter().map(|(e, r)| Ok((ts.require(e)?, *r))).collect()
        };
        let rates = model
            .entries()
            .map(|(k, v)| Ok((k.clone(), resolve(v)?)))
            .collect::<Result<_>>()?;
        let measurement = model.measurement().map(|v| resolve(v)).transpose()?;
        Ok(FirstOrderSimulator { ts, rates, measurement })
    }

    fn rates_for(&self, op: &GateOp) -> &[(usize, f64)] {
        let exact = GateKey {
            gate: op.gate,
            placement: Placement::On(op.qubits.to_vec()),
        };
        if let Some(v) = self.rates.get(&exact) {
            return v;
        }
        let any = GateKey {
            gate: op.gate,
            placement: Placement::Anywhere,
        };
        self.rates.get(&any).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Row `i` is the sum of the error vectors of the gates in layer `i`.
    pub fn rate_matrix(&self, c: &Circuit) -> RateMatrix {
        let mut e = RateMatrix::zeros(c.depth(), self.ts.len());
        for (i, layer) in c.layers.iter().enumerate() {
            let row = e.row_mut(i);
            for op in &layer.gates {
                for &(j, r) in self.rates_for(op) {
                    row[j] += r;
                }
            }
        }
        e
    }

    pub fn end_vector(&self, c: &Circuit, with_measurement: bool) -> Result<EndErrorVector> {
        let tables = compute_propagation(c, self.ts)?;
        let m = if with_measurement { self.measurement.as_deref() } else { None };
        accumulate(&self.rate_matrix(c), &tables, m)
    }

    pub fn fidelity(&self, c: &Circuit) -> Result<f64> {
        Ok(metric_from(&self.end_vector(c, false)?, Metric::Fidelity))
    }

    /// Success probability, including measurement errors if the model has any.
    pub fn pst(&self, c: &Circuit) -> Result<f64> {
        Ok(metric_from(&self.end_vector(c, true)?, Metric::Pst))
    }
}

pub fn first_order_fidelity(c: &Circuit, model: &ErrorModel, ts: &TrackedErrorSet) -> Result<f64> {
    FirstOrderSimulator::new(model, ts)?.fidelity(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitKind, Layer};
    use crate::errgen::ErrorGenerator;
    use crate::gate::Gate;
    use crate::graph::ConnectivityGraph;

    fn model_with(n: usize, entries: &[(Gate, usize, &str, f64)]) -> ErrorModel {
        let mut m = ErrorModel::empty(n);
        for &(gate, q, e, r) in entries {
            m.insert(
                GateKey { gate, placement: Placement::On(vec![q]) },
                vec![(ErrorGenerator::parse(e).unwrap(), r)],
            );
        }
        m
    }

    fn circuit(n: usize, layers: Vec<Layer>) -> Circuit {
        Circuit {
            id: "f".into(),
            n,
            graph: format!("ring:{n}"),
            active_qubits: (0..n).collect(),
            kind: CircuitKind::Iid,
            layers,
        }
    }

    #[test]
    fn examples() {
        let g = ConnectivityGraph::ring(2);
        let ts = TrackedErrorSet::build(&g, 1, 2).unwrap();
        let layer = Layer::new(vec![GateOp::single(Gate::Xpi, 0), GateOp::single(Gate::Ypi, 1)]);
        let c = circuit(2, vec![layer]);
        assert_eq!(first_order_fidelity(&c, &ErrorModel::empty(2), &ts).unwrap(), 1.0);

        let m = model_with(2, &[(Gate::Xpi, 0, "S:XI", 0.01)]);
        assert!((first_order_fidelity(&c, &m, &ts).unwrap() - 0.99).abs() < 1e-15);

        let theta = 0.02;
        let m = model_with(2, &[(Gate::Xpi, 0, "H:ZI", theta), (Gate::Ypi, 1, "H:IZ", theta)]);
        let f = first_order_fidelity(&c, &m, &ts).unwrap();
        assert!((f - (1.0 - 2.0 * theta * theta)).abs() < 1e-15);
    }

    #[test]
    fn untracked_generator_rejected() {
        let g = ConnectivityGraph::ring(3);
        let ts = TrackedErrorSet::build(&g, 0, 1).unwrap();
        let m = model_with(3, &[(Gate::Xpi, 0, "S:XXI", 0.01)]);
        assert!(matches!(FirstOrderSimulator::new(&m, &ts), Err(Error::GeneratorNotTracked(_))));
    }
}
