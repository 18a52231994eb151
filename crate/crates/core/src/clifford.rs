//! Clifford unitaries as conjugation tableaux.

use std::sync::OnceLock;

use crate::circuit::Layer;
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::pauli::{Letter, Pauli, PhasedPauli, SignedPauli};

/// A Clifford unitary `U`, stored as the images `U X_q U†` and `U Z_q U†`
/// of every single-qubit generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordTableau {
    n: usize,
    x_images: Vec<SignedPauli>,
    z_images: Vec<SignedPauli>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        CliffordTableau {
            n,
            x_images: (0..n)
                .map(|q| SignedPauli::plus(Pauli::single(n, q, Letter::X)))
                .collect(),
            z_images: (0..n)
                .map(|q| SignedPauli::plus(Pauli::single(n, q, Letter::Z)))
                .collect(),
        }
    }

    /// Builds a tableau from generator images, checking that they are
    /// Hermitian-compatible and preserve the canonical commutation relations.
    pub fn from_images(x_images: Vec<SignedPauli>, z_images: Vec<SignedPauli>) -> Result<Self> {
        let n = x_images.len();
        if z_images.len() != n || x_images.iter().chain(&z_images).any(|p| p.n() != n) {
            return Err(Error::DimensionMismatch(
                "tableau images must all act on n qubits".into(),
            ));
        }
        for a in 0..n {
            for b in 0..n {
                let xz = x_images[a].commutes_with(&z_images[b]);
                if xz != (a != b)
                    || (a < b && !x_images[a].commutes_with(&x_images[b]))
                    || (a < b && !z_images[a].commutes_with(&z_images[b]))
                {
                    return Err(Error::InvalidCircuit(format!(
                        "generator images are not symplectic (qubits {a}, {b})"
                    )));
                }
            }
        }
        Ok(CliffordTableau {
            n,
            x_images,
            z_images,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, q: usize) -> &SignedPauli {
        &self.x_images[q]
    }

    pub fn z_image(&self, q: usize) -> &SignedPauli {
        &self.z_images[q]
    }

    pub fn is_identity(&self) -> bool {
        *self == CliffordTableau::identity(self.n)
    }

    /// `U p U†`, sign included.
    pub fn conjugate(&self, p: &SignedPauli) -> Result<SignedPauli> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "tableau on {} qubits, Pauli on {}",
                self.n,
                p.n()
            )));
        }
        let mut out = self.conjugate_unsigned(&p.pauli);
        out.negative ^= p.negative;
        Ok(out)
    }

    /// `U p U†` for an unsigned (i.e. `+`) Pauli. Panics on dimension mismatch.
    pub fn conjugate_unsigned(&self, p: &Pauli) -> SignedPauli {
        assert_eq!(p.n(), self.n, "dimension mismatch in conjugation");
        let mut acc = PhasedPauli::identity(self.n);
        for q in p.support() {
            match p.letter(q) {
                Letter::X => acc.mul_signed(&self.x_images[q]),
                Letter::Z => acc.mul_signed(&self.z_images[q]),
                Letter::Y => {
                    // Y = iXZ
                    acc.phase = (acc.phase + 1) % 4;
                    acc.mul_signed(&self.x_images[q]);
                    acc.mul_signed(&self.z_images[q]);
                }
                Letter::I => unreachable!(),
            }
        }
        acc.into_signed()
    }

    /// Tableau of "apply `b`, then `a`", i.e. the unitary `A·B`.
    pub fn compose(a: &CliffordTableau, b: &CliffordTableau) -> Result<CliffordTableau> {
        if a.n != b.n {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose tableaux on {} and {} qubits",
                a.n, b.n
            )));
        }
        let map = |imgs: &[SignedPauli]| -> Vec<SignedPauli> {
            imgs.iter()
                .map(|p| a.conjugate(p).expect("dimensions checked"))
                .collect()
        };
        Ok(CliffordTableau {
            n: a.n,
            x_images: map(&b.x_images),
            z_images: map(&b.z_images),
        })
    }

    /// Tableau of a single gate on the given device qubits, embedded in `n` qubits.
    pub fn of_gate(gate: Gate, qubits: &[usize], n: usize) -> Result<CliffordTableau> {
        if qubits.len() != gate.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{gate} expects {} qubits, got {}",
                gate.arity(),
                qubits.len()
            )));
        }
        if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
            return Err(Error::InvalidCircuit(format!(
                "qubit {q} out of range for {n} qubits"
            )));
        }
        let mut t = CliffordTableau::identity(n);
        t.set_gate_images(gate, qubits);
        Ok(t)
    }

    fn set_gate_images(&mut self, gate: Gate, qubits: &[usize]) {
        let local = local_gate_images(gate);
        let embed = |p: &(bool, &'static str)| {
            let mut out = Pauli::identity(self.n);
            for (k, c) in p.1.chars().enumerate() {
                out.set_letter(qubits[k], Letter::from_char(c).expect("static table"));
            }
            SignedPauli::new(out, p.0)
        };
        for (k, &q) in qubits.iter().enumerate() {
            self.x_images[q] = embed(&local.0[k]);
            self.z_images[q] = embed(&local.1[k]);
        }
    }
}

/// Hard-coded local images `(X_k images, Z_k images)` for each gate, as
/// `(negative, letters over the gate's qubits)`. CNOT's qubit 0 is the control.
///
/// Rotations follow `R_P(θ) = exp(-iθP/2)`, so for instance
/// `R_X(π/2) Z R_X(π/2)† = -Y`.
type LocalImages = (Vec<(bool, &'static str)>, Vec<(bool, &'static str)>);

fn local_gate_images(gate: Gate) -> &'static LocalImages {
    static TABLE: OnceLock<Vec<LocalImages>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        Gate::ALL
            .iter()
            .map(|g| match g {
                Gate::Xpi2 => (vec![(false, "X")], vec![(true, "Y")]),
                Gate::X3pi2 => (vec![(false, "X")], vec![(false, "Y")]),
                Gate::Xpi => (vec![(false, "X")], vec![(true, "Z")]),
                Gate::Ypi2 => (vec![(true, "Z")], vec![(false, "X")]),
                Gate::Y3pi2 => (vec![(false, "Z")], vec![(true, "X")]),
                Gate::Ypi => (vec![(true, "X")], vec![(true, "Z")]),
                Gate::Zpi => (vec![(true, "X")], vec![(false, "Z")]),
                Gate::Cnot => (
                    vec![(false, "XX"), (false, "IX")],
                    vec![(false, "ZI"), (false, "ZZ")],
                ),
            })
            .collect()
    });
    &table[Gate::ALL.iter().position(|&g| g == gate).expect("gate in ALL")]
}

/// Tableau of one circuit layer on an `n`-qubit device. Untouched qubits act
/// as identity.
pub fn tableau_of_layer(layer: &Layer, n: usize) -> Result<CliffordTableau> {
    let mut t = CliffordTableau::identity(n);
    let mut used = vec![false; n];
    for op in &layer.gates {
        if op.qubits.len() != op.gate.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{} expects {} qubits, got {}",
                op.gate,
                op.gate.arity(),
                op.qubits.len()
            )));
        }
        for &q in &op.qubits {
            if q >= n {
                return Err(Error::InvalidCircuit(format!(
                    "qubit {q} out of range for {n} qubits"
                )));
            }
            if used[q] {
                return Err(Error::OverlappingGates { layer: 0, qubit: q });
            }
            used[q] = true;
        }
        t.set_gate_images(op.gate, &op.qubits);
    }
    Ok(t)
}

/// Conjugates `p` by a single layer. Faster than building the layer tableau
/// when only a few Paulis need propagating; the layer is assumed valid.
pub fn conjugate_by_layer(layer: &Layer, p: &SignedPauli) -> SignedPauli {
    let mut out = p.clone();
    for op in &layer.gates {
        let local = local_gate_images(op.gate);
        let letters: Vec<Letter> = op.qubits.iter().map(|&q| p.pauli.letter(q)).collect();
        if letters.iter().all(|&l| l == Letter::I) {
            continue;
        }
        let m = op.qubits.len();
        let image = |img: &(bool, &'static str)| {
            let ls: Vec<Letter> = img.1.chars().map(|c| Letter::from_char(c).unwrap()).collect();
            SignedPauli::new(Pauli::from_letters(&ls), img.0)
        };
        let mut acc = PhasedPauli::identity(m);
        for (k, l) in letters.iter().enumerate() {
            match l {
                Letter::X => acc.mul_signed(&image(&local.0[k])),
                Letter::Z => acc.mul_signed(&image(&local.1[k])),
                Letter::Y => {
                    acc.phase = (acc.phase + 1) % 4;
                    acc.mul_signed(&image(&local.0[k]));
                    acc.mul_signed(&image(&local.1[k]));
                }
                Letter::I => {}
            }
        }
        let signed = acc.into_signed();
        for (k, &q) in op.qubits.iter().enumerate() {
            out.pauli.set_letter(q, signed.pauli.letter(k));
        }
        out.negative ^= signed.negative;
    }
    out
}
