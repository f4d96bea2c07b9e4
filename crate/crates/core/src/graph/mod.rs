//! Spatial network data model.
//!
//! A [`SpatialGraph`] is an undirected simple graph whose nodes carry planar
//! coordinates. It is immutable once built; derived quantities (degrees,
//! edge list, neighbour lists) are computed at construction.

mod io;
mod stats;

pub use io::{load_graph, read_edges, read_nodes, write_edges, write_graph, write_nodes};
pub use stats::{
    default_grid, dispersion_of_counts, exponential_ks_test, index_of_dispersion, kolmogorov_q,
    ks_exponential, linked_distances, quadrat_counts, SpatialStats,
};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Node count above which [`DistanceMatrix`] computes entries on demand.
pub const DENSE_DISTANCE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    node_ids: Vec<String>,
    coords: Vec<[f64; 2]>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl SpatialGraph {
    /// Builds a graph from node ids, coordinates and index pairs.
    ///
    /// Duplicate edges (in either orientation) are collapsed. Self-loops,
    /// out-of-range endpoints, duplicate ids and non-finite coordinates are
    /// rejected.
    pub fn new(
        node_ids: Vec<String>,
        coords: Vec<[f64; 2]>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if coords.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} node ids but {} coordinates",
                n,
                coords.len()
            )));
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, id) in node_ids.iter().enumerate() {
            if seen.insert(id.as_str(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node id `{id}`")));
            }
        }
        for (id, c) in node_ids.iter().zip(&coords) {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "node `{id}` has non-finite coordinate"
                )));
            }
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!(
                    "self-loop on node `{}`",
                    node_ids[a]
                )));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &canon {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(SpatialGraph {
            node_ids,
            coords,
            neighbors,
            edges: canon,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Σ_z k_z, which is twice the edge count.
    pub fn total_degree(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    /// Same nodes and coordinates, with the given edges removed.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> SpatialGraph {
        let mut drop: Vec<(usize, usize)> =
            removed.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        drop.sort_unstable();
        let kept: Vec<(usize, usize)> = self
            .edges
            .iter()
            .copied()
            .filter(|e| drop.binary_search(e).is_err())
            .collect();
        SpatialGraph::new(self.node_ids.clone(), self.coords.clone(), kept)
            .expect("subgraph of a valid graph is valid")
    }

    /// Number of unordered node pairs, n(n-1)/2.
    pub fn pair_count(&self) -> usize {
        let n = self.node_count();
        n * n.saturating_sub(1) / 2
    }
}

/// Distance function between two planar points.
pub trait Metric: Send + Sync {
    fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

#[derive(Debug, Clone)]
enum DistanceStorage {
    Dense(Vec<f64>),
    OnDemand(Vec<[f64; 2]>),
}

/// Pairwise Euclidean distances. Dense for up to [`DENSE_DISTANCE_LIMIT`] nodes.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    storage: DistanceStorage,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            DistanceStorage::Dense(d) => d[i * self.n + j],
            DistanceStorage::OnDemand(c) => Euclidean.distance(c[i], c[j]),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, DistanceStorage::Dense(_))
    }
}

pub fn pairwise_distances(g: &SpatialGraph) -> DistanceMatrix {
    let n = g.node_count();
    if n > DENSE_DISTANCE_LIMIT {
        return DistanceMatrix {
            n,
            storage: DistanceStorage::OnDemand(g.coords().to_vec()),
        };
    }
    let c = g.coords();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = Euclidean.distance(c[i], c[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    DistanceMatrix {
        n,
        storage: DistanceStorage::Dense(d),
    }
}
