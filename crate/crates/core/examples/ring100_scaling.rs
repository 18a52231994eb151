//! Runs the first-order ring pipeline on growing rings to show how sampling,
//! assembly and training times scale with qubit count.

use qcap::pipeline::{reproduce_ring, RingConfig};

fn main() -> qcap::Result<()> {
    let sizes: Vec<usize> = match std::env::args().nth(1) {
        Some(s) => s.split(',').map(|x| x.parse().expect("ring size")).collect(),
        None => vec![8, 16, 32],
    };
    println!("{:>5} {:>8} {:>8} {:>9} {:>9} {:>9} {:>9}", "n", "tracked", "kept", "sim s", "asm s", "train s", "MAE %");
    for n in sizes {
        let mut cfg = RingConfig::new(n, 4);
        cfg.circuits = 300;
        cfg.train.max_epochs = 5;
        let run = reproduce_ring(&cfg)?;
        let (r, t) = (&run.report, &run.timings);
        println!(
            "{n:>5} {:>8} {:>8} {:>9.2} {:>9.2} {:>9.2} {:>9.3}",
            r.tracked_errors,
            r.retained,
            t.simulate_s,
            t.assemble_s,
            t.train_s,
            100.0 * r.test_report.mae
        );
    }
    Ok(())
}
