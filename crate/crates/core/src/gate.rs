use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The Clifford gate set: seven single-qubit rotations plus CNOT.
///
/// `Xpi2` is a rotation by π/2 about the X axis of the Bloch sphere
/// (`exp(-iπX/4)`), `X3pi2` by 3π/2, `Xpi` by π, and likewise for Y and Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    Xpi2,
    Ypi2,
    X3pi2,
    Y3pi2,
    Xpi,
    Ypi,
    Zpi,
    Cnot,
}

impl Gate {
    pub const SINGLE_QUBIT: [Gate; 7] = [
        Gate::Xpi2,
        Gate::Ypi2,
        Gate::X3pi2,
        Gate::Y3pi2,
        Gate::Xpi,
        Gate::Ypi,
        Gate::Zpi,
    ];

    pub const ALL: [Gate; 8] = [
        Gate::Xpi2,
        Gate::Ypi2,
        Gate::X3pi2,
        Gate::Y3pi2,
        Gate::Xpi,
        Gate::Ypi,
        Gate::Zpi,
        Gate::Cnot,
    ];

    /// Gates used for the central layer of mirror circuits.
    pub const PAULIS: [Gate; 3] = [Gate::Xpi, Gate::Ypi, Gate::Zpi];

    pub fn label(self) -> &'static str {
        match self {
            Gate::Xpi2 => "Xpi2",
            Gate::Ypi2 => "Ypi2",
            Gate::X3pi2 => "X3pi2",
            Gate::Y3pi2 => "Y3pi2",
            Gate::Xpi => "Xpi",
            Gate::Ypi => "Ypi",
            Gate::Zpi => "Zpi",
            Gate::Cnot => "CNOT",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Gate::Cnot => 2,
            _ => 1,
        }
    }

    pub fn inverse(self) -> Gate {
        match self {
            Gate::Xpi2 => Gate::X3pi2,
            Gate::X3pi2 => Gate::Xpi2,
            Gate::Ypi2 => Gate::Y3pi2,
            Gate::Y3pi2 => Gate::Ypi2,
            g => g,
        }
    }

    /// Index among the single-qubit gates (encoding channel), `None` for CNOT.
    pub fn single_qubit_index(self) -> Option<usize> {
        Gate::SINGLE_QUBIT.iter().position(|&g| g == self)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Gate::ALL
            .iter()
            .copied()
            .find(|g| g.label() == s)
            .ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}

impl Serialize for Gate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Gate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_roundtrip() {
        for g in Gate::ALL {
            assert_eq!(g.label().parse::<Gate>().unwrap(), g);
        }
        assert!(matches!("H".parse::<Gate>(), Err(Error::UnknownGate(_))));
    }

    #[test]
    fn inverse_is_involution() {
        for g in Gate::ALL {
            assert_eq!(g.inverse().inverse(), g);
        }
    }
}
