//! Success probabilities of mirror circuits with shot noise, scored against
//! a biased predictor with a Bayes factor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcap::gate::Gate;
use qcap::graph::ConnectivityGraph;
use qcap::metrics::{bayes_log10_factor, mae, pearson};
use qcap::noise::sample_weight1_model;
use qcap::pipeline::{sample_shots, simulate_values, SimMethod};
use qcap::propagation::Metric;
use qcap::sampler::{sample_mirror_circuits, SamplerConfig};

fn main() -> qcap::Result<()> {
    let g = ConnectivityGraph::ring(4);
    let model = sample_weight1_model(&g, &Gate::ALL, 2e-3, 2e-2, &mut ChaCha8Rng::seed_from_u64(9))?;
    let circuits = sample_mirror_circuits(&g, &SamplerConfig::small_device(9), 150, "m")?;
    let mut values = simulate_values(&circuits, &model, Metric::Pst, SimMethod::Exact, None)?;
    sample_shots(&mut values, 1024, 10)?;

    let truth: Vec<f64> = values.iter().map(|v| v.value).collect();
    let shots: Vec<(u64, u64)> = values.iter().map(|v| v.shots.unwrap()).collect();
    let observed: Vec<f64> = shots.iter().map(|&(n, k)| k as f64 / n as f64).collect();
    println!("observed vs true: MAE {:.4}, r {:.4}", mae(&observed, &truth)?, pearson(&observed, &truth)?);

    for bias in [0.001, 0.005, 0.02] {
        let biased: Vec<f64> = truth.iter().map(|p| (p - bias).max(0.0)).collect();
        let k = bayes_log10_factor(&truth, &biased, &shots)?;
        println!("true vs shifted by {bias}: log10 K = {k:.2}");
    }
    Ok(())
}
