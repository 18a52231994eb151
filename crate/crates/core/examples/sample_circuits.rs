//! Samples random and mirror circuits on a 4-qubit ring and writes them as
//! JSON lines.

use qcap::circuit::{target_bitstring, write_circuits};
use qcap::graph::ConnectivityGraph;
use qcap::sampler::{sample_iid_circuits, sample_mirror_circuits, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = ConnectivityGraph::ring(4);
    let cfg = SamplerConfig::small_device(11);
    let iid = sample_iid_circuits(&g, &cfg, 200, "c")?;
    let mirror = sample_mirror_circuits(&g, &cfg, 50, "m")?;

    let mut by_width = [0usize; 5];
    for c in &iid {
        by_width[c.width()] += 1;
    }
    println!("random circuits by width: {:?}", &by_width[1..]);
    let mean_depth = iid.iter().map(|c| c.depth()).sum::<usize>() as f64 / iid.len() as f64;
    println!("mean depth {mean_depth:.1}");

    let m = &mirror[0];
    println!(
        "{}: width {}, depth {}, expected outcome {:?}",
        m.id,
        m.width(),
        m.depth(),
        target_bitstring(m)?
    );

    let dir = std::env::temp_dir().join("qcap-sample-circuits");
    std::fs::create_dir_all(&dir)?;
    write_circuits(&dir.join("iid.jsonl"), &iid)?;
    write_circuits(&dir.join("mirror.jsonl"), &mirror)?;
    println!("wrote {}", dir.display());
    Ok(())
}
