//! Simulates fidelities for sampled circuits, assembles a split dataset and
//! writes it to disk.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcap::dataset::{assemble, header_for, write_split, AssembleOptions, TablesMode};
use qcap::encoding::{encode, ChannelSpec};
use qcap::errgen::TrackedErrorSet;
use qcap::gate::Gate;
use qcap::graph::ConnectivityGraph;
use qcap::noise::{sample_coherent_model, DEFAULT_MAX_STRENGTH};
use qcap::pipeline::{simulate_values, SimMethod};
use qcap::propagation::Metric;
use qcap::sampler::{sample_iid_circuits, SamplerConfig};

fn main() -> qcap::Result<()> {
    let g = ConnectivityGraph::ring(4);
    let ts = TrackedErrorSet::build(&g, 2, 2)?;
    let spec = ChannelSpec::for_graph(&g);
    let model = sample_coherent_model(&g, &Gate::ALL, DEFAULT_MAX_STRENGTH, &mut ChaCha8Rng::seed_from_u64(1))?;
    let circuits = sample_iid_circuits(&g, &SamplerConfig::small_device(1), 400, "c")?;

    let c = &circuits[0];
    let t = encode(c, &g, &spec, c.depth(), Metric::Fidelity)?;
    println!("{} channels per qubit; first circuit packs to {} bits", spec.n_ch, t.packed_bits().len());

    let values = simulate_values(&circuits, &model, Metric::Fidelity, SimMethod::Exact, None)?;
    let by_id: HashMap<_, _> = values.into_iter().map(|v| (v.id.clone(), v)).collect();
    let split = assemble(&circuits, &by_id, &ts, &AssembleOptions::new(Metric::Fidelity, 0.85, 2))?;
    println!(
        "{} tracked errors, d_max {}, split {}/{}/{}",
        ts.len(),
        split.d_max,
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    let dir = std::env::temp_dir().join("qcap-encode-dataset");
    write_split(&dir, &header_for(&ts, Metric::Fidelity, split.d_max), &split, TablesMode::Inline)?;
    println!("wrote {}", dir.display());
    Ok(())
}
