use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, SpatialGraph};

/// Upper bound on the number of EmpDist distance bins.
pub const EMPDIST_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    PA,
    ExpDist,
    EmpDist,
}

/// Equal-count distance bins with per-bin connection probabilities.
///
/// Bin `b` covers `[edges[b-1], edges[b])`; the first bin is open below and
/// the last open above. Bins without a training link share one pseudo-link
/// in proportion to their pair counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBins {
    /// Interior cut points, strictly increasing.
    pub edges: Vec<f64>,
    pub pairs: Vec<usize>,
    pub linked: Vec<usize>,
    pub prob: Vec<f64>,
}

impl EmpiricalBins {
    pub fn bin_of(&self, d: f64) -> usize {
        self.edges.partition_point(|&c| c <= d)
    }

    pub fn probability(&self, d: f64) -> f64 {
        self.prob[self.bin_of(d)]
    }

    pub fn fit(g: &SpatialGraph, d: &DistanceMatrix, max_bins: usize) -> Result<Self> {
        let n = g.node_count();
        let mut all = Vec::with_capacity(g.pair_count());
        for i in 0..n {
            for j in (i + 1)..n {
                all.push(d.get(i, j));
            }
        }
        if all.is_empty() {
            return Err(Error::InvalidGraph("EmpDist needs at least one node pair".into()));
        }
        all.sort_by(f64::total_cmp);
        let total = all.len();
        let bins = max_bins.clamp(1, total);
        let mut edges: Vec<f64> = Vec::new();
        for b in 1..bins {
            let c = all[b * total / bins];
            if c > all[0] && edges.last().is_none_or(|&last| c > last) {
                edges.push(c);
            }
        }
        let mut out = EmpiricalBins {
            pairs: vec![0; edges.len() + 1],
            linked: vec![0; edges.len() + 1],
            prob: vec![0.0; edges.len() + 1],
            edges,
        };
        for i in 0..n {
            for j in (i + 1)..n {
                let b = out.bin_of(d.get(i, j));
                out.pairs[b] += 1;
                if g.has_edge(i, j) {
                    out.linked[b] += 1;
                }
            }
        }
        let empty_pairs: usize = (0..out.pairs.len())
            .filter(|&b| out.linked[b] == 0)
            .map(|b| out.pairs[b])
            .sum();
        for b in 0..out.pairs.len() {
            out.prob[b] = if out.linked[b] > 0 {
                out.linked[b] as f64 / out.pairs[b] as f64
            } else {
                // One pseudo-link spread over all link-free pairs.
                (1.0 / empty_pairs as f64).min(1.0)
            };
        }
        Ok(out)
    }
}

/// A fitted closed-form link predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    /// Training-graph degrees.
    pub degrees: Vec<usize>,
    /// Mean linked distance (ExpDist).
    pub d_hat: Option<f64>,
    pub bins: Option<EmpiricalBins>,
    /// Normalizer dividing k_i k_j times the distance factor.
    pub z: f64,
}

impl BaselineModel {
    fn weight(&self, i: usize, j: usize, dist: f64) -> f64 {
        let kk = (self.degrees[i] * self.degrees[j]) as f64;
        match self.kind {
            BaselineKind::PA => kk,
            BaselineKind::ExpDist => kk * (-dist / self.d_hat.unwrap_or(1.0)).exp(),
            BaselineKind::EmpDist => {
                kk * self.bins.as_ref().map_or(0.0, |b| b.probability(dist))
            }
        }
    }

    /// Unclamped expected link value.
    pub fn raw_score(&self, i: usize, j: usize, dist: f64) -> f64 {
        self.weight(i, j, dist) / self.z
    }

    /// Link score in [0, 1]; values above 1 are clamped.
    pub fn score(&self, i: usize, j: usize, dist: f64) -> f64 {
        self.raw_score(i, j, dist).min(1.0)
    }
}

/// Fits a baseline on the training graph.
///
/// PA scores k_i k_j / (2 Σ_t k_t). ExpDist and EmpDist choose their
/// normalizer so that the unclamped scores sum to the edge count over all
/// pairs.
pub fn fit_baseline(kind: BaselineKind, g: &SpatialGraph, d: &DistanceMatrix) -> Result<BaselineModel> {
    if g.edge_count() == 0 {
        return Err(Error::InvalidGraph("baseline fit needs at least one training edge".into()));
    }
    let mut model = BaselineModel {
        kind,
        degrees: g.degrees(),
        d_hat: None,
        bins: None,
        z: 1.0,
    };
    match kind {
        BaselineKind::PA => {
            model.z = 2.0 * g.total_degree() as f64;
            return Ok(model);
        }
        BaselineKind::ExpDist => {
            let s: f64 = g.edges().iter().map(|&(i, j)| d.get(i, j)).sum();
            let d_hat = s / g.edge_count() as f64;
            if !(d_hat > 0.0) {
                return Err(Error::InvalidGraph(
                    "ExpDist needs a positive mean linked distance".into(),
                ));
            }
            model.d_hat = Some(d_hat);
        }
        BaselineKind::EmpDist => {
            model.bins = Some(EmpiricalBins::fit(g, d, EMPDIST_BINS)?);
        }
    }
    let n = g.node_count();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += model.weight(i, j, d.get(i, j));
        }
    }
    if !(total > 0.0) {
        return Err(Error::InvalidGraph("baseline weights sum to zero".into()));
    }
    model.z = total / g.edge_count() as f64;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::pairwise_distances;

    fn graph(coords: Vec<[f64; 2]>, edges: Vec<(usize, usize)>) -> SpatialGraph {
        let ids = (0..coords.len()).map(|i| format!("n{i}")).collect();
        SpatialGraph::new(ids, coords, edges).unwrap()
    }

    #[test]
    fn pa_clamps_at_one() {
        // Star: hub degree 4, leaves degree 1, Σk = 8, so hub-leaf = 4/16.
        let g = graph(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            vec![(0, 1), (0, 2), (0, 3), (0, 4)],
        );
        let d = pairwise_distances(&g);
        let m = fit_baseline(BaselineKind::PA, &g, &d).unwrap();
        assert_eq!(m.score(0, 1, 1.0), 0.25);
        let mut heavy = m.clone();
        heavy.degrees[1] = 40;
        assert_eq!(heavy.raw_score(0, 1, 1.0), 10.0);
        assert_eq!(heavy.score(0, 1, 1.0), 1.0);
    }

    #[test]
    fn expdist_d_hat_and_normalizer() {
        // Every link has length 3.
        let g = graph(
            vec![[0.0, 0.0], [3.0, 0.0], [6.0, 0.0], [9.0, 0.0]],
            vec![(0, 1), (1, 2), (2, 3)],
        );
        let d = pairwise_distances(&g);
        let m = fit_baseline(BaselineKind::ExpDist, &g, &d).unwrap();
        assert_eq!(m.d_hat, Some(3.0));
        let mut s = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                s += m.raw_score(i, j, d.get(i, j));
            }
        }
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empdist_matches_hand_tallies() {
        // Five points on a line at 0, 1, 3, 7, 15: all ten distances differ
        // (1, 3, 7, 15, 2, 6, 14, 4, 12, 8), so every pair gets its own bin.
        let g = graph(
            vec![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0], [15.0, 0.0]],
            vec![(0, 1), (1, 2), (0, 2), (3, 4)],
        );
        let d = pairwise_distances(&g);
        let b = EmpiricalBins::fit(&g, &d, 20).unwrap();
        assert_eq!(b.edges, vec![2.0, 3.0, 4.0, 6.0, 7.0, 8.0, 12.0, 14.0, 15.0]);
        assert_eq!(b.pairs, vec![1; 10]);
        // Linked distances 1, 2, 3 and 8.
        assert_eq!(b.linked, vec![1, 1, 1, 0, 0, 0, 1, 0, 0, 0]);
        for k in [0, 1, 2, 6] {
            assert_eq!(b.prob[k], 1.0);
        }
        for k in [3, 4, 5, 7, 8, 9] {
            assert!((b.prob[k] - 1.0 / 6.0).abs() < 1e-15);
        }

        // Two bins of five pairs each with a coarser grid.
        let b2 = EmpiricalBins::fit(&g, &d, 2).unwrap();
        assert_eq!(b2.edges, vec![7.0]);
        assert_eq!(b2.pairs, vec![5, 5]);
        assert_eq!(b2.linked, vec![3, 1]);
        assert_eq!(b2.prob, vec![0.6, 0.2]);
    }

    #[test]
    fn empdist_expected_count_within_one() {
        let g = graph(
            vec![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0], [15.0, 0.0]],
            vec![(0, 1), (1, 2), (0, 2), (3, 4)],
        );
        let d = pairwise_distances(&g);
        let b = EmpiricalBins::fit(&g, &d, 20).unwrap();
        let s: f64 = b.pairs.iter().zip(&b.prob).map(|(&p, &q)| p as f64 * q).sum();
        assert!((s - 4.0).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn ties_collapse_bins() {
        // A unit square has only two distinct distances.
        let g = graph(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
        );
        let d = pairwise_distances(&g);
        let b = EmpiricalBins::fit(&g, &d, 20).unwrap();
        assert_eq!(b.edges, vec![2f64.sqrt()]);
        assert_eq!(b.pairs, vec![4, 2]);
        assert_eq!(b.prob[0], 1.0);
        assert_eq!(b.prob[1], 0.5);
    }

    #[test]
    fn zero_edges_is_an_error() {
        let g = graph(vec![[0.0, 0.0], [1.0, 0.0]], vec![]);
        let d = pairwise_distances(&g);
        for k in [BaselineKind::PA, BaselineKind::ExpDist, BaselineKind::EmpDist] {
            assert!(fit_baseline(k, &g, &d).is_err());
        }
    }
}
