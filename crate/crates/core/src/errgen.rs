//! Hamiltonian and stochastic error generators and the tracked set.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ConnectivityGraph;
use crate::pauli::{Letter, Pauli};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    /// Coherent: `ρ ↦ -i[P, ρ]`.
    H,
    /// Pauli-stochastic: `ρ ↦ PρP - ρ`.
    S,
}

impl Kind {
    pub fn as_char(self) -> char {
        match self {
            Kind::H => 'H',
            Kind::S => 'S',
        }
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(Kind::H),
            "S" => Ok(Kind::S),
            _ => Err(Error::Config(format!("unknown error kind `{s}`"))),
        }
    }
}

/// An elementary error generator on the full device. The Pauli is unsigned;
/// signs live in rates and propagation tables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErrorGenerator {
    pub kind: Kind,
    pub pauli: Pauli,
}

impl ErrorGenerator {
    pub fn new(kind: Kind, pauli: Pauli) -> Self {
        debug_assert!(!pauli.is_identity());
        ErrorGenerator { kind, pauli }
    }

    pub fn h(pauli: Pauli) -> Self {
        Self::new(Kind::H, pauli)
    }

    pub fn s(pauli: Pauli) -> Self {
        Self::new(Kind::S, pauli)
    }

    /// Parses `"H:XIZ"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, pauli) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("expected `kind:pauli`, got `{s}`")))?;
        let pauli = Pauli::parse(pauli)?;
        if pauli.is_identity() {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        Ok(ErrorGenerator::new(kind.parse()?, pauli))
    }
}

impl fmt::Display for ErrorGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_char(), self.pauli)
    }
}

/// The ordered list of generators a model predicts rates for.
///
/// All weight-1 generators on every qubit, plus (when `max_weight == 2`) all
/// weight-2 generators on qubit pairs at most `hops` apart. Ordered by weight,
/// then qubit tuple, then letters, then H before S.
#[derive(Clone, Debug)]
pub struct TrackedErrorSet {
    generators: Vec<ErrorGenerator>,
    graph: ConnectivityGraph,
    hops: usize,
    max_weight: usize,
    index: HashMap<ErrorGenerator, usize>,
}

impl TrackedErrorSet {
    pub fn build(g: &ConnectivityGraph, hops: usize, max_weight: usize) -> Result<Self> {
        if !(1..=2).contains(&max_weight) {
            return Err(Error::Config(format!("max_weight must be 1 or 2, got {max_weight}")));
        }
        let n = g.n();
        let mut generators = Vec::new();
        for q in 0..n {
            for l in Letter::NON_IDENTITY {
                for kind in [Kind::H, Kind::S] {
                    generators.push(ErrorGenerator::new(kind, Pauli::single(n, q, l)));
                }
            }
        }
        if max_weight == 2 {
            for (a, b) in g.pairs_within(hops) {
                for la in Letter::NON_IDENTITY {
                    for lb in Letter::NON_IDENTITY {
                        for kind in [Kind::H, Kind::S] {
                            let p = Pauli::from_sparse(n, &[(a, la), (b, lb)]);
                            generators.push(ErrorGenerator::new(kind, p));
                        }
                    }
                }
            }
        }
        let index = generators
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        Ok(TrackedErrorSet {
            generators,
            graph: g.clone(),
            hops,
            max_weight,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[ErrorGenerator] {
        &self.generators
    }

    pub fn get(&self, j: usize) -> &ErrorGenerator {
        &self.generators[j]
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn max_weight(&self) -> usize {
        self.max_weight
    }

    pub fn index_of(&self, e: &ErrorGenerator) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Like [`index_of`](Self::index_of) but errors for untracked generators.
    pub fn require(&self, e: &ErrorGenerator) -> Result<usize> {
        self.index_of(e)
            .ok_or_else(|| Error::GeneratorNotTracked(e.to_string()))
    }

    /// Indices of generators whose Pauli has an X or Y letter; these are the
    /// ones that can flip a computational-basis outcome.
    pub fn xy_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.generators[j].pauli.contains_xy())
            .collect()
    }
}

/// Expected tracked-set size: `6n + 18·pairs` for weight 2, `6n` for weight 1.
pub fn tracked_count(g: &ConnectivityGraph, hops: usize, max_weight: usize) -> usize {
    6 * g.n()
        + if max_weight == 2 {
            18 * g.pairs_within(hops).len()
        } else {
            0
        }
}
