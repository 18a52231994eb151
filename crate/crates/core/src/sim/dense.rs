//! Small dense matrices: gate unitaries, Pauli matrices and their Pauli
//! transfer matrices.
//!
//! Local conventions: qubit `k` of an m-qubit block is bit `k` of the
//! computational-basis index, and digit `k` (base 4, `I=0, X=1, Y=2, Z=3`) of
//! the Pauli-basis index.

use std::sync::OnceLock;

use nalgebra::{Complex, DMatrix};

use crate::errgen::Kind;
use crate::gate::Gate;
use crate::pauli::Letter;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
const ONE: C64 = Complex { re: 1.0, im: 0.0 };
const I: C64 = Complex { re: 0.0, im: 1.0 };

pub fn letter_matrix(l: Letter) -> CMatrix {
    let v = match l {
        Letter::I => [ONE, ZERO, ZERO, ONE],
        Letter::X => [ZERO, ONE, ONE, ZERO],
        Letter::Y => [ZERO, -I, I, ZERO],
        Letter::Z => [ONE, ZERO, ZERO, -ONE],
    };
    CMatrix::from_row_slice(2, 2, &v)
}

/// Tensor product with `letters[0]` on the least significant bit.
pub fn pauli_matrix(letters: &[Letter]) -> CMatrix {
    let mut m = CMatrix::from_element(1, 1, ONE);
    for &l in letters {
        m = letter_matrix(l).kronecker(&m);
    }
    m
}

/// Letters of the Pauli-basis index `idx` on `m` qubits.
pub fn letters_of_index(idx: usize, m: usize) -> Vec<Letter> {
    (0..m).map(|k| Letter::from_index((idx >> (2 * k)) & 3)).collect()
}

/// `exp(-i·angle/2·P)` for a single-qubit Pauli.
fn rotation(l: Letter, angle: f64) -> CMatrix {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    CMatrix::identity(2, 2).map(|v| v * c) - letter_matrix(l).map(|v| v * I * s)
}

/// Unitary of a gate; for CNOT the control is local qubit 0.
pub fn gate_unitary(gate: Gate) -> CMatrix {
    use std::f64::consts::PI;
    match gate {
        Gate::Xpi2 => rotation(Letter::X, PI / 2.0),
        Gate::Ypi2 => rotation(Letter::Y, PI / 2.0),
        Gate::X3pi2 => rotation(Letter::X, 3.0 * PI / 2.0),
        Gate::Y3pi2 => rotation(Letter::Y, 3.0 * PI / 2.0),
        Gate::Xpi => rotation(Letter::X, PI),
        Gate::Ypi => rotation(Letter::Y, PI),
        Gate::Zpi => rotation(Letter::Z, PI),
        Gate::Cnot => {
            // |c, t> has index c + 2t; flip t when c = 1.
            let mut u = CMatrix::zeros(4, 4);
            for c in 0..2 {
                for t in 0..2 {
                    let src = c + 2 * t;
                    let dst = c + 2 * (t ^ c);
                    u[(dst, src)] = ONE;
                }
            }
            u
        }
    }
}

/// `R[a, b] = Re Tr(P_a · L(P_b)) / 2^m` for a superoperator `L` given as a
/// closure on dense matrices.
pub fn superop_ptm(m: usize, map: impl Fn(&CMatrix) -> CMatrix) -> DMatrix<f64> {
    let dim = 4usize.pow(m as u32);
    let basis: Vec<CMatrix> = (0..dim).map(|i| pauli_matrix(&letters_of_index(i, m))).collect();
    let norm = (1usize << m) as f64;
    let mut r = DMatrix::zeros(dim, dim);
    for (b, pb) in basis.iter().enumerate() {
        let image = map(pb);
        for (a, pa) in basis.iter().enumerate() {
            r[(a, b)] = (pa * &image).trace().re / norm;
        }
    }
    r
}

pub fn unitary_ptm(u: &CMatrix, m: usize) -> DMatrix<f64> {
    let ud = u.adjoint();
    superop_ptm(m, |p| u * p * &ud)
}

/// Generator matrix of `H_P: ρ ↦ -i[P, ρ]` or `S_P: ρ ↦ PρP - ρ`.
pub fn generator_ptm_local(kind: Kind, letters: &[Letter]) -> DMatrix<f64> {
    let p = pauli_matrix(letters);
    match kind {
        Kind::H => superop_ptm(letters.len(), |rho| (&p * rho - rho * &p).map(|v| v * -I)),
        Kind::S => superop_ptm(letters.len(), |rho| &p * rho * &p - rho),
    }
}

/// Cached PTM of each gate (indexed like `Gate::ALL`).
pub fn gate_ptm(gate: Gate) -> &'static DMatrix<f64> {
    static TABLE: OnceLock<Vec<DMatrix<f64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        Gate::ALL
            .iter()
            .map(|&g| {
                let mut r = unitary_ptm(&gate_unitary(g), g.arity());
                // Entries are exactly 0 or ±1 for Cliffords; clean up rounding.
                r.apply(|v| *v = v.round());
                r
            })
            .collect()
    });
    &table[Gate::ALL.iter().position(|&g| g == gate).expect("gate in ALL")]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_x_generator_is_diagonal() {
        let g = generator_ptm_local(Kind::S, &[Letter::X]);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, -2.0, -2.0]));
        assert!((g - expect).abs().max() < 1e-15);
    }

    #[test]
    fn generators_preserve_trace() {
        for kind in [Kind::H, Kind::S] {
            for idx in 1..16 {
                let g = generator_ptm_local(kind, &letters_of_index(idx, 2));
                assert!(g.row(0).iter().all(|v| v.abs() < 1e-15));
                if kind == Kind::H {
                    assert!(g.column(idx).iter().all(|v| v.abs() < 1e-15));
                }
            }
        }
    }

    #[test]
    fn gate_ptms_are_signed_permutations() {
        for g in Gate::ALL {
            let r = gate_ptm(g);
            let orth = r.transpose() * r;
            assert!((orth - DMatrix::identity(r.nrows(), r.nrows())).abs().max() < 1e-12);
            assert_eq!(r[(0, 0)], 1.0);
        }
    }

    #[test]
    fn xpi2_maps_z_to_minus_y() {
        let r = gate_ptm(Gate::Xpi2);
        // Column Z (3) has -1 in row Y (2).
        assert_eq!(r[(2, 3)], -1.0);
    }
}
