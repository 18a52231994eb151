//! Builds both kinds of gate error model, lists a few rates and round-trips
//! one through JSON.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcap::circuit::GateOp;
use qcap::gate::Gate;
use qcap::graph::ConnectivityGraph;
use qcap::noise::{sample_coherent_model, sample_weight1_model, ErrorModel, DEFAULT_MAX_H, DEFAULT_MAX_S, DEFAULT_MAX_STRENGTH};

fn main() -> qcap::Result<()> {
    let g = ConnectivityGraph::ring(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let coherent = sample_coherent_model(&g, &Gate::ALL, DEFAULT_MAX_STRENGTH, &mut rng)?;
    let cnot = GateOp::cnot(1, 2);
    let errors = coherent.errors_for(&cnot);
    println!("CNOT(1,2) carries {} error generators, e.g.", errors.len());
    for (e, rate) in errors.iter().take(5) {
        println!("  {e:<10} {rate:+.3e}");
    }

    let weight1 = sample_weight1_model(&g, &Gate::ALL, DEFAULT_MAX_S, DEFAULT_MAX_H, &mut rng)?;
    // Weight-1 rates belong to the gate label, wherever it is applied.
    let x = GateOp::single(Gate::Xpi2, 0);
    let errors1 = weight1.errors_for(&x);
    println!("Xpi2 carries {} device-wide weight-1 generators, e.g.", errors1.len());
    for (e, rate) in errors1.iter().take(4) {
        println!("  {e:<10} {rate:+.3e}");
    }

    let text = coherent.to_json()?;
    let back = ErrorModel::from_json(&text)?;
    assert_eq!(back.errors_for(&cnot), errors);
    println!("JSON model: {} bytes, {} gate entries", text.len(), back.entries().count());
    Ok(())
}
