//! Spatial diagnostics: quadrat index of dispersion and an exponential fit
//! to linked-pair distances with a Kolmogorov-Smirnov goodness-of-fit test.

use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, SpatialGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialStats {
    pub index_of_dispersion: f64,
    pub quadrat_grid: (usize, usize),
    pub exp_fit_rate: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

impl SpatialStats {
    pub fn compute(g: &SpatialGraph, d: &DistanceMatrix, grid: (usize, usize)) -> Result<Self> {
        let index_of_dispersion = index_of_dispersion(g, grid)?;
        let (exp_fit_rate, ks_statistic, ks_p_value) = exponential_ks_test(g, d)?;
        Ok(SpatialStats {
            index_of_dispersion,
            quadrat_grid: grid,
            exp_fit_rate,
            ks_statistic,
            ks_p_value,
        })
    }
}

/// ⌈√(n/2)⌉ cells per side, about two expected points per cell.
pub fn default_grid(n: usize) -> (usize, usize) {
    let s = ((n as f64 / 2.0).sqrt().ceil() as usize).max(1);
    (s, s)
}

/// Node counts per quadrat over the tight bounding box, row-major.
pub fn quadrat_counts(g: &SpatialGraph, grid: (usize, usize)) -> Result<Vec<usize>> {
    let (gx, gy) = grid;
    if gx == 0 || gy == 0 {
        return Err(Error::InvalidInput("quadrat grid dimensions must be >= 1".into()));
    }
    let coords = g.coords();
    if coords.is_empty() {
        return Err(Error::InvalidInput("index of dispersion needs at least one node".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in coords {
        for k in 0..2 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let ext = [hi[0] - lo[0], hi[1] - lo[1]];
    if ext[0] == 0.0 && ext[1] == 0.0 {
        return Err(Error::InvalidInput(
            "all nodes coincide; bounding box is degenerate".into(),
        ));
    }
    let cell = |v: f64, k: usize, cells: usize| -> usize {
        if ext[k] == 0.0 {
            return 0;
        }
        (((v - lo[k]) / ext[k] * cells as f64) as usize).min(cells - 1)
    };
    let mut counts = vec![0usize; gx * gy];
    for c in coords {
        counts[cell(c[1], 1, gy) * gx + cell(c[0], 0, gx)] += 1;
    }
    Ok(counts)
}

/// Variance-to-mean ratio of quadrat counts, using the unbiased (n − 1) variance.
pub fn dispersion_of_counts(counts: &[usize]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::InvalidInput("need at least two quadrats".into()));
    }
    let m = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / m;
    if mean == 0.0 {
        return Err(Error::InvalidInput("mean quadrat count is zero".into()));
    }
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (m - 1.0);
    Ok(var / mean)
}

pub fn index_of_dispersion(g: &SpatialGraph, grid: (usize, usize)) -> Result<f64> {
    dispersion_of_counts(&quadrat_counts(g, grid)?)
}

/// Distances of all linked pairs, in edge order.
pub fn linked_distances(g: &SpatialGraph, d: &DistanceMatrix) -> Vec<f64> {
    g.edges().iter().map(|&(i, j)| d.get(i, j)).collect()
}

/// Asymptotic Kolmogorov survival function Q(λ) = P(K > λ).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        // Jacobi-transformed series converges fast for small λ.
        let mut s = 0.0;
        for k in 1..=100 {
            let t = (2 * k - 1) as f64;
            let term = (-(t * t) * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
            s += term;
            if term < 1e-300 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// Fits an exponential by maximum likelihood and runs a one-sample KS test.
///
/// Returns `(rate, ks_statistic, p_value)`.
pub fn ks_exponential(samples: &[f64]) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("KS test needs at least one sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::InvalidInput(
            "mean distance is zero; exponential fit undefined".into(),
        ));
    }
    let rate = 1.0 / mean;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        d = d.max((k + 1) as f64 / n - f).max(f - k as f64 / n);
    }
    let d = d.clamp(0.0, 1.0);
    Ok((rate, d, kolmogorov_q(n.sqrt() * d)))
}

/// Exponential fit and KS test on the distances of linked pairs.
pub fn exponential_ks_test(g: &SpatialGraph, d: &DistanceMatrix) -> Result<(f64, f64, f64)> {
    if g.edge_count() == 0 {
        return Err(Error::InvalidInput("exponential fit needs at least one edge".into()));
    }
    ks_exponential(&linked_distances(g, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::pairwise_distances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dispersion_hand_values() {
        assert_eq!(dispersion_of_counts(&[2, 2, 2, 2]).unwrap(), 0.0);
        assert_eq!(dispersion_of_counts(&[4, 0, 0, 0]).unwrap(), 4.0);
        assert!(dispersion_of_counts(&[0, 0]).is_err());
    }

    #[test]
    fn dispersion_rejects_degenerate() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let g = SpatialGraph::new(ids, vec![[1.0, 1.0]; 2], []).unwrap();
        assert!(index_of_dispersion(&g, (2, 2)).is_err());
        let g0 = SpatialGraph::new(vec![], vec![], []).unwrap();
        assert!(index_of_dispersion(&g0, (2, 2)).is_err());
    }

    #[test]
    fn default_grid_two_per_cell() {
        assert_eq!(default_grid(500), (16, 16));
        assert_eq!(default_grid(1), (1, 1));
    }

    #[test]
    fn constant_distances_give_reciprocal_rate() {
        let (rate, _, _) = ks_exponential(&[3.0; 7]).unwrap();
        assert!((rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // Both series are exact; they must meet at the switch point.
        let lo = {
            let l: f64 = 1.0 - 1e-12;
            let mut s = 0.0;
            for k in 1..=100 {
                let kf = k as f64;
                let t = (-2.0 * kf * kf * l * l).exp();
                s += if k % 2 == 1 { t } else { -t };
            }
            2.0 * s
        };
        assert!((kolmogorov_q(1.0 - 1e-12) - lo).abs() < 1e-10);
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 5e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    /// Brute-force sup over every sample point, approached from both sides.
    fn ks_brute(samples: &[f64], rate: f64) -> f64 {
        let n = samples.len() as f64;
        let mut best: f64 = 0.0;
        for &x in samples {
            let f = 1.0 - (-rate * x).exp();
            let at = samples.iter().filter(|&&s| s <= x).count() as f64 / n;
            let below = samples.iter().filter(|&&s| s < x).count() as f64 / n;
            best = best.max((at - f).abs()).max((below - f).abs());
        }
        best
    }

    #[test]
    fn ks_matches_brute_force_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 6 + trial % 10;
            let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
            let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < 0.5 && edges.len() < 100 {
                        edges.push((i, j));
                    }
                }
            }
            let g = SpatialGraph::new(ids, coords, edges).unwrap();
            if g.edge_count() == 0 {
                continue;
            }
            let d = pairwise_distances(&g);
            let (rate, stat, p) = exponential_ks_test(&g, &d).unwrap();
            let brute = ks_brute(&linked_distances(&g, &d), rate);
            assert!((stat - brute).abs() < 1e-12, "{stat} vs {brute}");
            assert!((0.0..=1.0).contains(&p));
        }
    }
}
