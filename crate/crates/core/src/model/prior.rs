use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, SpatialGraph};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ln Φ(z) for the standard normal CDF, accurate far into the lower tail.
pub fn ln_normal_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-0.5 * erfc(z / std::f64::consts::SQRT_2)).ln_1p()
    } else if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio expansion.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + series.ln()
    }
}

/// Normal distribution N(μ, σ) restricted to (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl TruncNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::Config(format!(
                "truncated normal needs finite mu and sigma > 0 (got mu={mu}, sigma={sigma})"
            )));
        }
        Ok(TruncNormal { mu, sigma })
    }

    /// Log of the mass the untruncated normal places on (0, ∞).
    pub fn ln_mass(&self) -> f64 {
        ln_normal_cdf(self.mu / self.sigma)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - LN_SQRT_2PI - self.ln_mass()
    }

    /// Inverse Mills ratio at the standardized truncation point.
    fn hazard(&self) -> (f64, f64) {
        let a = -self.mu / self.sigma;
        let ln_phi_a = -0.5 * a * a - LN_SQRT_2PI;
        (a, (ln_phi_a - self.ln_mass()).exp())
    }

    pub fn mean(&self) -> f64 {
        let (_, lambda) = self.hazard();
        self.mu + self.sigma * lambda
    }

    pub fn variance(&self) -> f64 {
        let (a, lambda) = self.hazard();
        self.sigma * self.sigma * (1.0 + a * lambda - lambda * lambda)
    }

    /// Exact draw: plain rejection near the mode, Robert's exponential
    /// proposal when the truncation point is far in the upper tail.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = -self.mu / self.sigma;
        let z = if a < 0.5 {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                if z > a {
                    break z;
                }
            }
        } else {
            let rate = 0.5 * (a + (a * a + 4.0).sqrt());
            let exp = Exp::new(rate).expect("positive rate");
            loop {
                let z = a + exp.sample(rng);
                let u: f64 = rng.random();
                if u <= (-0.5 * (z - rate).powi(2)).exp() {
                    break z;
                }
            }
        };
        let x = self.mu + self.sigma * z;
        if x > 0.0 {
            x
        } else {
            f64::MIN_POSITIVE
        }
    }
}

/// Hyperparameters of every prior in the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha: TruncNormal,
    pub gamma: TruncNormal,
    pub phi: TruncNormal,
    pub radius: TruncNormal,
    /// Label probabilities over `0..=k_comm`; entry 0 is the don't-care label.
    pub theta_c: Vec<f64>,
    pub k_comm: usize,
}

/// ⌈n/10⌉ communities, at least one.
pub fn default_k_comm(n: usize) -> usize {
    ((n as f64 * 0.10).ceil() as usize).max(1)
}

pub fn uniform_theta(k_comm: usize) -> Vec<f64> {
    vec![1.0 / (k_comm + 1) as f64; k_comm + 1]
}

impl PriorConfig {
    /// Weakly informative defaults scaled to the network's distance and
    /// degree-product units.
    pub fn default_for(g: &SpatialGraph, d: &DistanceMatrix) -> Self {
        let dbar = mean_linked_distance(g, d);
        let pa_sd = pa_spread(g);
        let k_comm = default_k_comm(g.node_count());
        PriorConfig {
            alpha: TruncNormal { mu: dbar, sigma: 2.0 * dbar },
            gamma: TruncNormal { mu: pa_sd, sigma: 5.0 * pa_sd },
            phi: TruncNormal { mu: 1.0, sigma: 2.0 },
            radius: TruncNormal { mu: 0.5 * dbar, sigma: dbar },
            theta_c: uniform_theta(k_comm),
            k_comm,
        }
    }

    pub fn with_k_comm(mut self, k_comm: usize) -> Self {
        self.k_comm = k_comm;
        self.theta_c = uniform_theta(k_comm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("phi", self.phi),
            ("r", self.radius),
        ] {
            TruncNormal::new(p.mu, p.sigma)
                .map_err(|e| Error::Config(format!("prior.{name}: {e}")))?;
        }
        if self.k_comm == 0 {
            return Err(Error::Config("model.k_comm must be positive".into()));
        }
        if self.theta_c.len() != self.k_comm + 1 {
            return Err(Error::Config(format!(
                "theta_c has {} entries, expected k_comm + 1 = {}",
                self.theta_c.len(),
                self.k_comm + 1
            )));
        }
        if self.theta_c.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Config("theta_c entries must be nonnegative".into()));
        }
        let s: f64 = self.theta_c.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("theta_c sums to {s}, not 1")));
        }
        Ok(())
    }
}

/// Mean distance over linked pairs, falling back to the mean over all pairs
/// (or 1.0) when there are no edges.
pub fn mean_linked_distance(g: &SpatialGraph, d: &DistanceMatrix) -> f64 {
    let v = if g.edge_count() > 0 {
        g.edges().iter().map(|&(i, j)| d.get(i, j)).sum::<f64>() / g.edge_count() as f64
    } else {
        let n = g.node_count();
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += d.get(i, j);
            }
        }
        if g.pair_count() > 0 {
            s / g.pair_count() as f64
        } else {
            0.0
        }
    };
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

fn pa_spread(g: &SpatialGraph) -> f64 {
    let n = g.node_count();
    let total = g.total_degree() as f64;
    if total == 0.0 || n < 2 {
        return 1.0;
    }
    let k = g.degrees();
    let (mut s, mut s2, mut c) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = (k[i] * k[j]) as f64 / total;
            s += p;
            s2 += p * p;
            c += 1.0;
        }
    }
    let var = (s2 / c - (s / c).powi(2)).max(0.0);
    let sd = var.sqrt();
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn far_truncation_is_plain_normal() {
        let t = TruncNormal::new(10.0, 1.0).unwrap();
        assert!((t.ln_pdf(10.0) + LN_SQRT_2PI).abs() < 1e-8);
    }

    /// Composite Simpson quadrature on [0, upper].
    fn simpson(f: impl Fn(f64) -> f64, upper: f64, panels: usize) -> f64 {
        let h = upper / panels as f64;
        let mut s = 0.0;
        for k in 0..=panels {
            let w = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * f(k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        for &(mu, sigma) in &[(1.0, 1.0), (-2.0, 1.5), (10.0, 80f64.sqrt()), (0.0, 0.3)] {
            let t = TruncNormal::new(mu, sigma).unwrap();
            let upper = mu.max(0.0) + 12.0 * sigma;
            // Right limit at the truncation point.
            let f = |x: f64| t.ln_pdf(x.max(f64::MIN_POSITIVE)).exp();
            let total = simpson(f, upper, 200_000);
            assert!((total - 1.0).abs() < 1e-6, "mu={mu} sigma={sigma}: {total}");
        }
    }

    #[test]
    fn tail_cdf_is_finite_and_continuous() {
        let a = ln_normal_cdf(-29.999_999);
        let b = ln_normal_cdf(-30.000_001);
        assert!(a.is_finite() && b.is_finite());
        assert!((a - b).abs() < 1e-4);
        assert!(ln_normal_cdf(8.0) < 0.0 && ln_normal_cdf(8.0) > -1e-14);
    }

    #[test]
    fn sampler_matches_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(mu, sigma) in &[(1.0, 1.0), (-3.0, 1.0), (0.2, 0.05), (-8.0, 0.5)] {
            let t = TruncNormal::new(mu, sigma).unwrap();
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| t.sample(&mut rng)).collect();
            assert!(xs.iter().all(|&x| x > 0.0));
            let m = xs.iter().sum::<f64>() / n as f64;
            let se = (t.variance() / n as f64).sqrt();
            assert!((m - t.mean()).abs() < 5.0 * se, "mu={mu}: {m} vs {}", t.mean());
        }
    }

    #[test]
    fn negative_support_is_minus_infinity() {
        let t = TruncNormal::new(1.0, 1.0).unwrap();
        assert_eq!(t.ln_pdf(0.0), f64::NEG_INFINITY);
        assert_eq!(t.ln_pdf(-1.0), f64::NEG_INFINITY);
        assert_eq!(t.ln_pdf(f64::NAN), f64::NEG_INFINITY);
    }

    #[test]
    fn theta_validation() {
        let g = SpatialGraph::new(vec![], vec![], []).unwrap();
        let d = crate::graph::pairwise_distances(&g);
        let mut p = PriorConfig::default_for(&g, &d).with_k_comm(3);
        assert!(p.validate().is_ok());
        p.theta_c = vec![0.5, 0.5, 0.5, 0.5];
        assert!(p.validate().is_err());
        p.theta_c = vec![0.5, 0.5];
        assert!(p.validate().is_err());
    }
}
