//! Undirected communication graphs with a fixed edge orientation.
//!
//! Agents are numbered `1..=N` at the API boundary. Edge `k` listed as
//! `(i, j)` puts `+1` in row `i` and `-1` in row `j` of column `k` of the
//! incidence matrix `B`; the Laplacian is `L = B Bᵀ`.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topology families used by the experiment generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// Cycle `1-2-...-N-1`.
    Ring,
    /// Every pair of agents.
    Complete,
    /// Cycle plus the fan chords `(1, 3) .. (1, N-1)`; `2N - 3` edges,
    /// minimally rigid in the plane.
    TriangulatedPolygon,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Ring => "ring",
            GraphKind::Complete => "complete",
            GraphKind::TriangulatedPolygon => "triangulated_polygon",
        })
    }
}

/// Connected, oriented, simple graph on `N` agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n_agents: usize,
    /// Zero-based `(positive end, negative end)`.
    edges: Vec<(usize, usize)>,
    /// Row-major `N x M`.
    incidence: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        let edges: Vec<(usize, usize)> = repr.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edges(repr.n, &edges)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            n: g.n_agents,
            edges: g.edges_one_based().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    /// Builds a graph from 1-based edge pairs; the first endpoint of each
    /// pair becomes the positive end.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::TooFewAgents {
                min: 2,
                found: n_agents,
            });
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == 0 || j == 0 || i > n_agents || j > n_agents {
                return Err(Error::EndpointOutOfRange { i, j, n: n_agents });
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge { i, j });
            }
            zero_based.push((i - 1, j - 1));
        }

        let m = zero_based.len();
        let mut incidence = vec![0i8; n_agents * m];
        for (k, &(i, j)) in zero_based.iter().enumerate() {
            incidence[i * m + k] = 1;
            incidence[j * m + k] = -1;
        }

        let g = Graph {
            n_agents,
            edges: zero_based,
            incidence,
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// One of the standard topologies on `n_agents >= 3` agents.
    pub fn generate(kind: GraphKind, n_agents: usize) -> Result<Self> {
        if n_agents < 3 {
            return Err(Error::TooFewAgents {
                min: 3,
                found: n_agents,
            });
        }
        let ring = (1..=n_agents).map(|i| (i, i % n_agents + 1));
        let edges: Vec<(usize, usize)> = match kind {
            GraphKind::Ring => ring.collect(),
            GraphKind::Complete => (1..=n_agents)
                .flat_map(|i| (i + 1..=n_agents).map(move |j| (i, j)))
                .collect(),
            GraphKind::TriangulatedPolygon => ring.chain((3..n_agents).map(|j| (1, j))).collect(),
        };
        Graph::from_edges(n_agents, &edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Zero-based `(positive, negative)` endpoints in edge order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edges_one_based(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(i, j)| (i + 1, j + 1))
    }

    /// Entry `b_{i,k}` of the incidence matrix (zero-based indices).
    pub fn incidence_entry(&self, agent: usize, edge: usize) -> i8 {
        self.incidence[agent * self.edges.len() + edge]
    }

    /// The `N x M` incidence matrix.
    pub fn incidence(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.n_agents, self.n_edges(), |i, k| {
            i64::from(self.incidence_entry(i, k))
        })
    }

    /// `L = B Bᵀ`, in exact integer arithmetic.
    pub fn laplacian(&self) -> DMatrix<i64> {
        let b = self.incidence();
        &b * b.transpose()
    }

    fn laplacian_spectrum(&self) -> Vec<f64> {
        let l = self.laplacian().map(|v| v as f64);
        let mut values: Vec<f64> = SymmetricEigen::new(l).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Smallest nonzero Laplacian eigenvalue `λ₂` (positive for connected
    /// graphs, which construction guarantees).
    pub fn algebraic_connectivity(&self) -> f64 {
        self.laplacian_spectrum()[1]
    }

    /// Largest Laplacian eigenvalue, i.e. `‖Bᵀ‖²` in the spectral norm.
    pub fn spectral_radius(&self) -> f64 {
        *self
            .laplacian_spectrum()
            .last()
            .expect("graph has at least two agents")
    }

    fn is_connected(&self) -> bool {
        let mut adjacency = vec![Vec::new(); self.n_agents];
        for &(i, j) in &self.edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut visited = vec![false; self.n_agents];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        visited.into_iter().all(|v| v)
    }
}
