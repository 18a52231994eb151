//! Compares exact process fidelities with the first-order estimate while
//! the error strength is scaled down.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcap::errgen::TrackedErrorSet;
use qcap::gate::Gate;
use qcap::graph::ConnectivityGraph;
use qcap::noise::sample_coherent_model;
use qcap::sampler::{sample_iid_circuits, SamplerConfig};
use qcap::sim::{ExactSimulator, FirstOrderSimulator};

fn main() -> qcap::Result<()> {
    let g = ConnectivityGraph::ring(4);
    let ts = TrackedErrorSet::build(&g, 2, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = sample_coherent_model(&g, &Gate::ALL, 1e-3, &mut rng)?;
    let circuits = sample_iid_circuits(&g, &SamplerConfig::fixed_width(3, 30, 5), 20, "c")?;

    println!("{:>8} {:>12} {:>12}", "scale", "mean F", "max |Δ|");
    for scale in [1.0, 0.5, 0.25, 0.125] {
        let model = base.scaled(scale);
        let exact = ExactSimulator::new(&model);
        let fo = FirstOrderSimulator::new(&model, &ts)?;
        let mut worst: f64 = 0.0;
        let mut mean = 0.0;
        for c in &circuits {
            let f = exact.fidelity(c)?;
            mean += f / circuits.len() as f64;
            worst = worst.max((f - fo.fidelity(c)?).abs());
        }
        println!("{scale:>8} {mean:>12.6} {worst:>12.3e}");
    }
    Ok(())
}
