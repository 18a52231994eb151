//! n-qubit Pauli operators in symplectic (X/Z bitmask) form.
//!
//! A [`Pauli`] is an unsigned tensor product of single-qubit letters; the
//! letter on qubit `q` is read from bit `q` of the X and Z masks:
//! `(0,0) = I`, `(1,0) = X`, `(0,1) = Z`, `(1,1) = Y`. Masks are packed into
//! 64-bit words so devices with hundreds of qubits stay cheap.
//!
//! [`SignedPauli`] adds a real `±1` sign. Internally products are tracked with
//! a phase `i^k` using the convention `Y = iXZ`; anything returned publicly is
//! Hermitian.
//!
//! Textual form lists letters by qubit index, qubit 0 first: `"+XIZY"` is
//! `X` on qubit 0, `Z` on qubit 2 and `Y` on qubit 3.

use std::fmt;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

pub(crate) type Words = SmallVec<[u64; 2]>;

fn word_count(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const NON_IDENTITY: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    /// Position in the `I, X, Y, Z` ordering; also the base-4 digit used by
    /// Pauli-basis indices.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        [Letter::I, Letter::X, Letter::Y, Letter::Z][i & 3]
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | '_' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// Unsigned n-qubit Pauli operator.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pauli {
    n: usize,
    x: Words,
    z: Words,
}

impl Pauli {
    pub fn identity(n: usize) -> Self {
        let w = word_count(n);
        Pauli {
            n,
            x: smallvec![0; w],
            z: smallvec![0; w],
        }
    }

    /// A single letter on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, letter: Letter) -> Self {
        let mut p = Pauli::identity(n);
        p.set_letter(q, letter);
        p
    }

    /// Builds a Pauli from `(qubit, letter)` pairs.
    pub fn from_sparse(n: usize, terms: &[(usize, Letter)]) -> Self {
        let mut p = Pauli::identity(n);
        for &(q, l) in terms {
            p.set_letter(q, l);
        }
        p
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut p = Pauli::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set_letter(q, l);
        }
        p
    }

    /// Parses a letter string such as `"XIZY"` (qubit 0 first).
    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::InvalidPauli(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        Ok(Pauli::from_letters(&letters))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn letter(&self, q: usize) -> Letter {
        assert!(q < self.n, "qubit {q} out of range for n = {}", self.n);
        let (w, b) = (q / 64, q % 64);
        Letter::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set_letter(&mut self, q: usize, letter: Letter) {
        assert!(q < self.n, "qubit {q} out of range for n = {}", self.n);
        let (w, b) = (q / 64, q % 64);
        let (x, z) = letter.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((x as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((z as u64) << b);
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n).map(|q| self.letter(q)).collect()
    }

    /// Number of qubits carrying a non-identity letter.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// True iff some qubit carries an X or a Y.
    pub fn contains_xy(&self) -> bool {
        self.x.iter().any(|&w| w != 0)
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    /// Qubits with a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, (x, z)) in self.x.iter().zip(&self.z).enumerate() {
            let mut bits = x | z;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(w * 64 + b);
                bits &= bits - 1;
            }
        }
        out
    }

    pub fn commutes_with(&self, other: &Pauli) -> bool {
        assert_eq!(self.n, other.n);
        let mut parity = 0u32;
        for i in 0..self.x.len() {
            parity ^= ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones() & 1;
        }
        parity == 0
    }

    /// Letters restricted to `qubits`, as a compact string (e.g. `"XZ"`).
    pub fn letters_on(&self, qubits: &[usize]) -> String {
        qubits.iter().map(|&q| self.letter(q).as_char()).collect()
    }

    /// `self · other = i^k · result`; returns `(k mod 4, result)`.
    fn mul_with_phase(&self, other: &Pauli) -> (u8, Pauli) {
        debug_assert_eq!(self.n, other.n);
        let mut acc: i32 = 0;
        let mut x = Words::with_capacity(self.x.len());
        let mut z = Words::with_capacity(self.x.len());
        for i in 0..self.x.len() {
            let (ax, az, bx, bz) = (self.x[i], self.z[i], other.x[i], other.z[i]);
            let (x1, y1, z1) = (ax & !az, ax & az, !ax & az);
            let (x2, y2, z2) = (bx & !bz, bx & bz, !bx & bz);
            // XY = iZ, YZ = iX, ZX = iY and the reversed orders give -i.
            let plus = (x1 & y2) | (y1 & z2) | (z1 & x2);
            let minus = (y1 & x2) | (z1 & y2) | (x1 & z2);
            acc += plus.count_ones() as i32 - minus.count_ones() as i32;
            x.push(ax ^ bx);
            z.push(az ^ bz);
        }
        (acc.rem_euclid(4) as u8, Pauli { n: self.n, x, z })
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pauli({self})")
    }
}

/// Hermitian Pauli with a real sign.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SignedPauli {
    pub pauli: Pauli,
    pub negative: bool,
}

impl SignedPauli {
    pub fn new(pauli: Pauli, negative: bool) -> Self {
        SignedPauli { pauli, negative }
    }

    pub fn plus(pauli: Pauli) -> Self {
        SignedPauli::new(pauli, false)
    }

    pub fn identity(n: usize) -> Self {
        SignedPauli::plus(Pauli::identity(n))
    }

    /// Parses `"+XIZ"` / `"-YY"`; a missing sign means `+`.
    pub fn parse(s: &str) -> Result<Self> {
        let (negative, rest) = match s.as_bytes().first() {
            Some(b'+') => (false, &s[1..]),
            Some(b'-') => (true, &s[1..]),
            _ => (false, s),
        };
        Ok(SignedPauli::new(Pauli::parse(rest)?, negative))
    }

    pub fn n(&self) -> usize {
        self.pauli.n()
    }

    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn weight(&self) -> usize {
        self.pauli.weight()
    }

    pub fn contains_xy(&self) -> bool {
        self.pauli.contains_xy()
    }

    pub fn commutes_with(&self, other: &SignedPauli) -> bool {
        self.pauli.commutes_with(&other.pauli)
    }
}

impl std::ops::Neg for SignedPauli {
    type Output = SignedPauli;

    fn neg(mut self) -> SignedPauli {
        self.negative = !self.negative;
        self
    }
}

impl fmt::Display for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.negative { '-' } else { '+' }, self.pauli)
    }
}

impl fmt::Debug for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignedPauli({self})")
    }
}

/// Number of qubits with a non-identity letter.
pub fn pauli_weight(p: &SignedPauli) -> usize {
    p.weight()
}

/// True iff the Pauli has an X or Y letter somewhere.
pub fn contains_xy(p: &SignedPauli) -> bool {
    p.contains_xy()
}

/// `i^phase · pauli`, used while accumulating products.
#[derive(Clone, Debug)]
pub(crate) struct PhasedPauli {
    pub phase: u8,
    pub pauli: Pauli,
}

impl PhasedPauli {
    pub fn identity(n: usize) -> Self {
        PhasedPauli {
            phase: 0,
            pauli: Pauli::identity(n),
        }
    }

    pub fn mul_signed(&mut self, rhs: &SignedPauli) {
        let (k, prod) = self.pauli.mul_with_phase(&rhs.pauli);
        self.phase = (self.phase + if rhs.negative { 2 } else { 0 } + k) % 4;
        self.pauli = prod;
    }

    /// Converts back to a Hermitian signed Pauli. Panics if the phase is `±i`,
    /// which would mean a non-Hermitian product slipped through.
    pub fn into_signed(self) -> SignedPauli {
        assert!(
            self.phase % 2 == 0,
            "non-Hermitian phase i^{} on {}",
            self.phase,
            self.pauli
        );
        SignedPauli::new(self.pauli, self.phase == 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert_eq!(pauli_weight(&SignedPauli::identity(4)), 0);
        assert_eq!(pauli_weight(&SignedPauli::parse("+XIII").unwrap()), 1);
        assert_eq!(pauli_weight(&SignedPauli::parse("+IYIZ").unwrap()), 2);
    }

    #[test]
    fn contains_xy_examples() {
        assert!(!contains_xy(&SignedPauli::parse("ZZI").unwrap()));
        assert!(contains_xy(&SignedPauli::parse("IYI").unwrap()));
        assert!(!contains_xy(&SignedPauli::identity(3)));
    }

    #[test]
    fn parse_display_roundtrip() {
        for s in ["+XIZY", "-YY", "+I", "-ZXZXZ"] {
            assert_eq!(SignedPauli::parse(s).unwrap().to_string(), s);
        }
        assert!(SignedPauli::parse("+XQ").is_err());
        assert!(SignedPauli::parse("+").is_err());
    }

    #[test]
    fn letters_beyond_one_word() {
        let mut p = Pauli::identity(130);
        p.set_letter(0, Letter::X);
        p.set_letter(64, Letter::Y);
        p.set_letter(129, Letter::Z);
        assert_eq!(p.weight(), 3);
        assert_eq!(p.support(), vec![0, 64, 129]);
        assert_eq!(p.letter(64), Letter::Y);
        p.set_letter(64, Letter::I);
        assert_eq!(p.support(), vec![0, 129]);
    }

    #[test]
    fn single_qubit_products() {
        let x = Pauli::parse("X").unwrap();
        let y = Pauli::parse("Y").unwrap();
        let z = Pauli::parse("Z").unwrap();
        // XY = iZ, YX = -iZ, XZ = -iY, ZX = iY, YZ = iX
        assert_eq!(x.mul_with_phase(&y), (1, z.clone()));
        assert_eq!(y.mul_with_phase(&x), (3, z.clone()));
        assert_eq!(x.mul_with_phase(&z), (3, y.clone()));
        assert_eq!(z.mul_with_phase(&x), (1, y.clone()));
        assert_eq!(y.mul_with_phase(&z), (1, x.clone()));
        assert_eq!(x.mul_with_phase(&x), (0, Pauli::identity(1)));
    }

    #[test]
    fn commutation() {
        let xx = Pauli::parse("XX").unwrap();
        let zz = Pauli::parse("ZZ").unwrap();
        let zi = Pauli::parse("ZI").unwrap();
        assert!(xx.commutes_with(&zz));
        assert!(!xx.commutes_with(&zi));
    }
}
