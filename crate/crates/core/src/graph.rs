//! Device connectivity graphs.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Undirected, connected qubit connectivity graph with precomputed hop
/// distances.
#[derive(Clone, Debug)]
pub struct ConnectivityGraph {
    name: String,
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    dist: Vec<u32>,
}

impl PartialEq for ConnectivityGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EdgeFile {
    Bare(Vec<(usize, usize)>),
    Described {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        n: Option<usize>,
        edges: Vec<(usize, usize)>,
    },
}

impl ConnectivityGraph {
    /// Builds a graph; rejects self-loops, out-of-range qubits and
    /// disconnected graphs. Duplicate and reversed edges are merged.
    pub fn from_edges(name: impl Into<String>, n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let name = name.into();
        if n == 0 {
            return Err(Error::InvalidGraph(format!("{name}: zero qubits")));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("{name}: self-loop on qubit {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "{name}: edge ({a}, {b}) out of range for {n} qubits"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let mut dist = vec![u32::MAX; n * n];
        for src in 0..n {
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &neighbors[u] {
                    if row[v] == u32::MAX {
                        row[v] = row[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        if dist.iter().any(|&d| d == u32::MAX) {
            return Err(Error::InvalidGraph(format!("{name}: graph is not connected")));
        }
        Ok(ConnectivityGraph {
            name,
            n,
            edges,
            neighbors,
            dist,
        })
    }

    pub fn ring(n: usize) -> Self {
        let edges: Vec<_> = match n {
            1 => vec![],
            2 => vec![(0, 1)],
            _ => (0..n).map(|q| (q, (q + 1) % n)).collect(),
        };
        Self::from_edges(format!("ring:{n}"), n, &edges).expect("rings are valid graphs")
    }

    pub fn line(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|q| (q - 1, q)).collect();
        Self::from_edges(format!("line:{n}"), n, &edges).expect("lines are valid graphs")
    }

    /// Five-qubit "T" layout: 0-1-2 with 1-3-4 hanging off the middle.
    pub fn tbar5() -> Self {
        Self::from_edges("tbar:5", 5, &[(0, 1), (1, 2), (1, 3), (3, 4)]).expect("valid")
    }

    /// Five-qubit "bowtie": two triangles sharing qubit 2.
    pub fn bowtie5() -> Self {
        Self::from_edges(
            "bowtie:5",
            5,
            &[(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)],
        )
        .expect("valid")
    }

    /// Parses `ring:<n>`, `line:<n>`, `tbar:5`, `bowtie:5`, or a path to a
    /// JSON edge list (either `[[a, b], ...]` or `{"n": .., "edges": [...]}`).
    pub fn from_spec(spec: &str) -> Result<Self> {
        let parse_n = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::InvalidGraph(format!("bad qubit count in `{spec}`")))
        };
        if let Some(rest) = spec.strip_prefix("ring:") {
            return Ok(Self::ring(parse_n(rest)?));
        }
        if let Some(rest) = spec.strip_prefix("line:") {
            return Ok(Self::line(parse_n(rest)?));
        }
        match spec {
            "tbar:5" => return Ok(Self::tbar5()),
            "bowtie:5" => return Ok(Self::bowtie5()),
            _ => {}
        }
        let path = Path::new(spec);
        if !path.exists() {
            return Err(Error::InvalidGraph(format!(
                "`{spec}` is neither a known graph name nor an edge-list file"
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (name, n, edges) = match serde_json::from_str::<EdgeFile>(&text)? {
            EdgeFile::Bare(edges) => (None, None, edges),
            EdgeFile::Described { name, n, edges } => (name, n, edges),
        };
        let n = n.unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1));
        Self::from_edges(name.unwrap_or_else(|| spec.to_string()), n, &edges)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q]
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.dist[a * self.n + b] == 1
    }

    /// Shortest-path edge count between two qubits.
    pub fn hop_distance(&self, a: usize, b: usize) -> usize {
        self.dist[a * self.n + b] as usize
    }

    /// Unordered pairs `(a, b)`, `a < b`, at hop distance `1..=h`.
    pub fn pairs_within(&self, h: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.hop_distance(a, b) <= h {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Qubits within `l` hops of any qubit in `support`, ascending.
    pub fn ball(&self, support: &[usize], l: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&q| support.iter().any(|&s| self.hop_distance(q, s) <= l))
            .collect()
    }

    /// True if `qubits` induce a connected subgraph.
    pub fn is_connected_subset(&self, qubits: &[usize]) -> bool {
        let Some(&first) = qubits.first() else {
            return false;
        };
        let inside: BTreeSet<usize> = qubits.iter().copied().collect();
        let mut seen = BTreeSet::from([first]);
        let mut stack = vec![first];
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if inside.contains(&v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == inside.len()
    }
}
