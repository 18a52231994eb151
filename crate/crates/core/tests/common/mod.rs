//! Dense reference implementations built directly from matrix definitions.
//! Qubit `q` is bit `q` of a computational-basis index.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};

use qcap::circuit::{Circuit, Layer};
use qcap::errgen::{ErrorGenerator, Kind};
use qcap::gate::Gate;
use qcap::noise::ErrorModel;
use qcap::pauli::{Letter, Pauli};

pub type C = Complex<f64>;
pub type CMat = DMatrix<C>;

const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// `P|b⟩ = phase·|b ⊕ x⟩`, letter by letter.
pub fn pauli_matrix(p: &Pauli) -> CMat {
    let n = p.n();
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for b in 0..dim {
        let mut out = b;
        let mut phase = ONE;
        for q in 0..n {
            let bit = (b >> q) & 1;
            let minus = if bit == 1 { -1.0 } else { 1.0 };
            match p.letter(q) {
                Letter::I => {}
                Letter::X => out ^= 1 << q,
                Letter::Z => phase *= minus,
                Letter::Y => {
                    out ^= 1 << q;
                    phase *= I * minus;
                }
            }
        }
        m[(out, b)] = phase;
    }
    m
}

fn single(letter: Letter, q: usize, n: usize) -> CMat {
    pauli_matrix(&Pauli::single(n, q, letter))
}

/// `exp(-i·angle/2·P_q)`.
fn rotation(letter: Letter, angle: f64, q: usize, n: usize) -> CMat {
    let dim = 1 << n;
    let id = CMat::identity(dim, dim);
    id * C::new((angle / 2.0).cos(), 0.0) - single(letter, q, n) * (I * (angle / 2.0).sin())
}

pub fn gate_matrix(gate: Gate, qubits: &[usize], n: usize) -> CMat {
    use std::f64::consts::PI;
    let q = qubits[0];
    match gate {
        Gate::Xpi2 => rotation(Letter::X, PI / 2.0, q, n),
        Gate::Ypi2 => rotation(Letter::Y, PI / 2.0, q, n),
        Gate::X3pi2 => rotation(Letter::X, 1.5 * PI, q, n),
        Gate::Y3pi2 => rotation(Letter::Y, 1.5 * PI, q, n),
        Gate::Xpi => rotation(Letter::X, PI, q, n),
        Gate::Ypi => rotation(Letter::Y, PI, q, n),
        Gate::Zpi => rotation(Letter::Z, PI, q, n),
        Gate::Cnot => {
            let (c, t) = (qubits[0], qubits[1]);
            let dim = 1 << n;
            let mut m = CMat::zeros(dim, dim);
            for b in 0..dim {
                let out = if (b >> c) & 1 == 1 { b ^ (1 << t) } else { b };
                m[(out, b)] = ONE;
            }
            m
        }
    }
}

pub fn layer_unitary(layer: &Layer, n: usize) -> CMat {
    let dim = 1 << n;
    layer
        .gates
        .iter()
        .fold(CMat::identity(dim, dim), |u, op| gate_matrix(op.gate, &op.qubits, n) * u)
}

/// `U_{d-1} ⋯ U_{from}`.
pub fn unitary_from(c: &Circuit, from: usize) -> CMat {
    let dim = 1 << c.n;
    c.layers[from..]
        .iter()
        .fold(CMat::identity(dim, dim), |u, l| layer_unitary(l, c.n) * u)
}

pub fn all_paulis(n: usize) -> Vec<Pauli> {
    (0..1usize << (2 * n))
        .map(|idx| {
            let letters: Vec<Letter> = (0..n).map(|q| Letter::from_index((idx >> (2 * q)) & 3)).collect();
            Pauli::from_letters(&letters)
        })
        .collect()
}

/// Writes `m` as `±Q` for a Pauli `Q`, or panics.
pub fn as_signed_pauli(m: &CMat, n: usize) -> (i8, Pauli) {
    let dim = (1 << n) as f64;
    for q in all_paulis(n) {
        let c = (pauli_matrix(&q).adjoint() * m).trace() / dim;
        if (c.re.abs() - 1.0).abs() < 1e-9 && c.im.abs() < 1e-9 {
            return (if c.re > 0.0 { 1 } else { -1 }, q);
        }
    }
    panic!("not a signed Pauli");
}

/// `V·P·V†` with `V` the unitary of layers after `after_layer`.
pub fn conjugate_to_end(c: &Circuit, after_layer: usize, p: &Pauli) -> (i8, Pauli) {
    let v = unitary_from(c, after_layer + 1);
    as_signed_pauli(&(&v * pauli_matrix(p) * v.adjoint()), c.n)
}

/// Column-stacking superoperator: `vec(AρB) = (Bᵀ ⊗ A)·vec(ρ)`.
pub fn generator_superop(e: &ErrorGenerator) -> CMat {
    let p = pauli_matrix(&e.pauli);
    let dim = p.nrows();
    let id = CMat::identity(dim, dim);
    match e.kind {
        Kind::H => (id.kronecker(&p) - p.transpose().kronecker(&id)) * (-I),
        Kind::S => p.transpose().kronecker(&p) - CMat::identity(dim * dim, dim * dim),
    }
}

pub fn unitary_superop(u: &CMat) -> CMat {
    u.conjugate().kronecker(u)
}

/// `exp(Σ rate·L)` for the listed generators.
pub fn error_channel(terms: &[(ErrorGenerator, f64)], n: usize) -> CMat {
    let d2 = 1 << (2 * n);
    let mut l = CMat::zeros(d2, d2);
    for (e, r) in terms {
        l += generator_superop(e) * C::new(*r, 0.0);
    }
    l.exp()
}

/// Noisy superoperator of the whole circuit: each layer is its ideal
/// unitary followed by the exponential of every gate's summed generators.
pub fn noisy_superop(c: &Circuit, model: &ErrorModel) -> CMat {
    let d2 = 1 << (2 * c.n);
    let mut s = CMat::identity(d2, d2);
    for layer in &c.layers {
        let terms: Vec<(ErrorGenerator, f64)> =
            layer.gates.iter().flat_map(|op| model.errors_for(op).iter().cloned()).collect();
        s = error_channel(&terms, c.n) * unitary_superop(&layer_unitary(layer, c.n)) * s;
    }
    s
}

/// `Tr(S_ideal† S_noisy) / d²`.
pub fn process_fidelity(c: &Circuit, model: &ErrorModel) -> f64 {
    let ideal = unitary_superop(&unitary_from(c, 0));
    let noisy = noisy_superop(c, model);
    let d2 = (1usize << (2 * c.n)) as f64;
    ((ideal.adjoint() * noisy).trace() / d2).re
}

/// Probability of basis state `target` after running from `|0…0⟩`,
/// with an optional terminal error channel.
pub fn outcome_probability(c: &Circuit, model: &ErrorModel, target: usize) -> f64 {
    let dim = 1usize << c.n;
    let mut rho = nalgebra::DVector::<C>::zeros(dim * dim);
    rho[0] = ONE;
    let mut out = noisy_superop(c, model) * rho;
    if let Some(m) = model.measurement() {
        out = error_channel(m, c.n) * out;
    }
    out[target * dim + target].re
}

/// Ideal output bit string of a definite-outcome circuit, from a
/// statevector run.
pub fn statevector_outcome(c: &Circuit) -> Option<Vec<u8>> {
    let dim = 1usize << c.n;
    let mut psi = nalgebra::DVector::<C>::zeros(dim);
    psi[0] = ONE;
    let psi = unitary_from(c, 0) * psi;
    let (best, p) = (0..dim)
        .map(|b| (b, psi[b].norm_sqr()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if (p - 1.0).abs() > 1e-9 {
        return None;
    }
    Some((0..c.n).map(|q| ((best >> q) & 1) as u8).collect())
}
