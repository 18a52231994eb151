//! Trains the error-rate network on a small 4-qubit ring dataset and reports
//! test metrics. `cargo run --release --example train_ring4 -- 2000 40` sets
//! the circuit count and epoch limit.

use qcap::pipeline::{reproduce_sim4, Sim4Config};

fn main() -> qcap::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let mut cfg = Sim4Config::new(7);
    cfg.circuits = args.next().unwrap_or(1000);
    cfg.train.max_epochs = args.next().unwrap_or(20);
    cfg.mirror_circuits = 100;

    let run = reproduce_sim4(&cfg)?;
    let r = &run.report;
    println!("{} circuits kept, {} parameters, {} epochs", r.retained, r.n_params, r.epochs_run);
    for e in run.history.epochs.iter().step_by(5.max(r.epochs_run / 10)) {
        println!("  epoch {:>3}  train {:.4e}  validation {:.4e}", e.epoch, e.train_loss, e.validation_loss);
    }
    let show = |name: &str, rep: &qcap::metrics::EvalReport| {
        println!(
            "{name}: MAE {:.3}%  r {}",
            100.0 * rep.mae,
            rep.pearson.map_or("n/a".into(), |p| format!("{p:.3}"))
        );
    };
    show("test", &r.test_report);
    if let Some(m) = &r.mirror_report {
        show("mirror", m);
    }
    println!("{:.1} s", run.timings.total_s);
    Ok(())
}
