//! Pushes a few Paulis through a short Clifford circuit, layer by layer and
//! through the whole-circuit tableau, and prints where they end up.

use qcap::circuit::{Circuit, CircuitKind, GateOp, Layer};
use qcap::clifford::conjugate_by_layer;
use qcap::gate::Gate;
use qcap::pauli::SignedPauli;

fn main() -> qcap::Result<()> {
    let layers = vec![
        Layer::new(vec![GateOp::single(Gate::Xpi2, 0), GateOp::single(Gate::Ypi2, 2)]),
        Layer::new(vec![GateOp::cnot(0, 1)]),
        Layer::new(vec![GateOp::cnot(2, 1), GateOp::single(Gate::Y3pi2, 0)]),
    ];
    let c = Circuit {
        id: "demo".into(),
        n: 3,
        graph: "line:3".into(),
        active_qubits: vec![0, 1, 2],
        kind: CircuitKind::Iid,
        layers,
    };
    let tableau = c.tableau()?;
    for q in 0..3 {
        println!("X{q} -> {}   Z{q} -> {}", tableau.x_image(q), tableau.z_image(q));
    }

    for text in ["+XII", "+IZI", "-YZX"] {
        let p = SignedPauli::parse(text)?;
        let mut trail = vec![p.to_string()];
        let mut cur = p.clone();
        for layer in &c.layers {
            cur = conjugate_by_layer(layer, &cur);
            trail.push(cur.to_string());
        }
        assert_eq!(cur, tableau.conjugate(&p)?);
        println!("{}", trail.join(" -> "));
    }
    Ok(())
}
