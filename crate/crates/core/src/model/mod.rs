//! Radius and Radius+Comms link models.
//!
//! The link logit for a pair is
//!
//! ```text
//! η_ij = (r_i + r_j − D_ij) / α + β(c_i, c_j) + (k_i k_j / Σ_z k_z − M) / γ
//! ```
//!
//! with β ≡ 0 for the Radius model. Likelihood terms are evaluated in log
//! space through a stable log-sigmoid so that |η| up to 1e6 stays finite.

mod prior;

pub use prior::{
    default_k_comm, ln_normal_cdf, mean_linked_distance, uniform_theta, PriorConfig, TruncNormal,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pairwise_distances, DistanceMatrix, SpatialGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Radius,
    RadiusComms,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Radius => "Radius",
            ModelKind::RadiusComms => "RadiusComms",
        })
    }
}

/// One configuration of all latent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl ParamState {
    pub fn radius(alpha: f64, gamma: f64, radii: Vec<f64>) -> Self {
        ParamState {
            alpha,
            gamma,
            phi: None,
            radii,
            labels: None,
        }
    }

    pub fn radius_comms(alpha: f64, gamma: f64, phi: f64, radii: Vec<f64>, labels: Vec<usize>) -> Self {
        ParamState {
            alpha,
            gamma,
            phi: Some(phi),
            radii,
            labels: Some(labels),
        }
    }

    pub fn kind(&self) -> ModelKind {
        if self.labels.is_some() {
            ModelKind::RadiusComms
        } else {
            ModelKind::Radius
        }
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels.as_ref().map_or(0, |l| l[i])
    }

    /// Checks positivity, lengths and label range.
    pub fn validate(&self, n: usize, k_comm: usize) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.alpha) || !pos(self.gamma) {
            return Err(Error::InvalidInput("alpha and gamma must be positive".into()));
        }
        if self.radii.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} radii for {n} nodes",
                self.radii.len()
            )));
        }
        if !self.radii.iter().all(|&r| pos(r)) {
            return Err(Error::InvalidInput("radii must be positive".into()));
        }
        match (&self.phi, &self.labels) {
            (None, None) => Ok(()),
            (Some(phi), Some(labels)) => {
                if !(*phi >= 0.0 && phi.is_finite()) {
                    return Err(Error::InvalidInput("phi must be nonnegative".into()));
                }
                if labels.len() != n {
                    return Err(Error::InvalidInput(format!("{} labels for {n} nodes", labels.len())));
                }
                if let Some(&c) = labels.iter().find(|&&c| c > k_comm) {
                    return Err(Error::InvalidInput(format!("label {c} exceeds k_comm = {k_comm}")));
                }
                Ok(())
            }
            _ => Err(Error::InvalidInput("phi and labels must be given together".into())),
        }
    }
}

/// Community term: 0 if either label is don't-care, +φ within a community,
/// −φ across communities.
#[inline]
pub fn beta_term(ci: usize, cj: usize, phi: f64) -> f64 {
    if ci == 0 || cj == 0 {
        0.0
    } else if ci == cj {
        phi
    } else {
        -phi
    }
}

/// ln σ(x), finite for all finite x.
#[inline]
pub fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-likelihood contribution of a single pair with logit `eta`.
#[inline]
pub fn pair_term(linked: bool, eta: f64) -> f64 {
    if linked {
        ln_sigmoid(eta)
    } else {
        ln_sigmoid(-eta)
    }
}

/// Midpoint between the mean normalized degree product of linked pairs and
/// of non-linked pairs.
pub fn compute_m(g: &SpatialGraph) -> Result<f64> {
    let n = g.node_count();
    let total = g.total_degree() as f64;
    let k = g.degrees();
    let (mut linked, mut nl) = (0.0, 0usize);
    let (mut unlinked, mut nu) = (0.0, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if total > 0.0 { (k[i] * k[j]) as f64 / total } else { 0.0 };
            if g.has_edge(i, j) {
                linked += p;
                nl += 1;
            } else {
                unlinked += p;
                nu += 1;
            }
        }
    }
    if nl == 0 || nu == 0 {
        return Err(Error::InvalidGraph(
            "M needs at least one linked and one non-linked pair".into(),
        ));
    }
    Ok(0.5 * (linked / nl as f64 + unlinked / nu as f64))
}

/// Whether the degree (preferential attachment) term enters the logit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DegreeTerm {
    #[default]
    Enabled,
    Disabled,
}

/// Precomputed per-pair quantities for one observed graph.
#[derive(Debug, Clone)]
pub struct ModelContext {
    graph: SpatialGraph,
    n: usize,
    dist: Vec<f64>,
    adj: Vec<bool>,
    /// k_i k_j / Σ_z k_z − M, or 0 when the degree term is disabled.
    pa_centered: Vec<f64>,
    m: f64,
    degree_term: DegreeTerm,
}

impl ModelContext {
    pub fn new(g: &SpatialGraph) -> Self {
        Self::with_degree_term(g, DegreeTerm::Enabled)
    }

    /// Builds the context. When M is undefined (no linked or no non-linked
    /// pairs) it falls back to the mean normalized product over all pairs.
    pub fn with_degree_term(g: &SpatialGraph, degree_term: DegreeTerm) -> Self {
        let d = pairwise_distances(g);
        Self::from_parts(g, &d, degree_term)
    }

    pub fn from_parts(g: &SpatialGraph, d: &DistanceMatrix, degree_term: DegreeTerm) -> Self {
        let n = g.node_count();
        let total = g.total_degree() as f64;
        let k = g.degrees();
        let pa = |i: usize, j: usize| {
            if total > 0.0 {
                (k[i] * k[j]) as f64 / total
            } else {
                0.0
            }
        };
        let m = compute_m(g).unwrap_or_else(|_| {
            let pairs = g.pair_count();
            if pairs == 0 {
                return 0.0;
            }
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += pa(i, j);
                }
            }
            s / pairs as f64
        });
        let mut dist = vec![0.0; n * n];
        let mut adj = vec![false; n * n];
        let mut pa_centered = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                dist[i * n + j] = d.get(i, j);
                if degree_term == DegreeTerm::Enabled {
                    pa_centered[i * n + j] = pa(i, j) - m;
                }
            }
            for &j in g.neighbors(i) {
                adj[i * n + j] = true;
            }
        }
        ModelContext {
            graph: g.clone(),
            n,
            dist,
            adj,
            pa_centered,
            m,
            degree_term,
        }
    }

    pub fn graph(&self) -> &SpatialGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn degree_term(&self) -> DegreeTerm {
        self.degree_term
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    /// k_i k_j / Σ_z k_z − M as used in the logit (0 if the term is disabled).
    #[inline]
    pub fn pa_centered(&self, i: usize, j: usize) -> f64 {
        self.pa_centered[i * self.n + j]
    }

    /// Logit with node i's radius and label overridden.
    #[inline]
    pub(crate) fn logit_with(
        &self,
        s: &ParamState,
        i: usize,
        r_i: f64,
        c_i: usize,
        j: usize,
    ) -> f64 {
        let k = i * self.n + j;
        let mut eta = (r_i + s.radii[j] - self.dist[k]) / s.alpha + self.pa_centered[k] / s.gamma;
        if let (Some(phi), Some(labels)) = (s.phi, s.labels.as_ref()) {
            eta += beta_term(c_i, labels[j], phi);
        }
        eta
    }

    /// Logit from the state as is; also defined for i == j (used for
    /// null-model diagonals).
    #[inline]
    pub(crate) fn logit_raw(&self, s: &ParamState, i: usize, j: usize) -> f64 {
        self.logit_with(s, i, s.radii[i], s.label(i), j)
    }

    /// Row log-likelihood with node i's radius and label replaced.
    pub(crate) fn row_ll_with(&self, s: &ParamState, i: usize, r_i: f64, c_i: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n {
            if j == i {
                continue;
            }
            acc += pair_term(self.adj[i * self.n + j], self.logit_with(s, i, r_i, c_i, j));
        }
        acc
    }
}

/// η_ij for i ≠ j.
pub fn link_logit(ctx: &ModelContext, state: &ParamState, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidInput(format!("link logit undefined for i = j = {i}")));
    }
    Ok(ctx.logit_raw(state, i, j))
}

pub fn link_probability(ctx: &ModelContext, state: &ParamState, i: usize, j: usize) -> Result<f64> {
    link_logit(ctx, state, i, j).map(sigmoid)
}

/// Σ over unordered pairs of A log σ(η) + (1 − A) log(1 − σ(η)).
pub fn log_likelihood(ctx: &ModelContext, state: &ParamState) -> f64 {
    let n = ctx.n;
    let mut acc = 0.0;
    for i in 0..n {
        let (r_i, c_i) = (state.radii[i], state.label(i));
        for j in (i + 1)..n {
            acc += pair_term(ctx.adj[i * n + j], ctx.logit_with(state, i, r_i, c_i, j));
        }
    }
    acc
}

/// Node i's share of the likelihood: Σ_{j≠i} of the pair terms.
pub fn row_log_likelihood(ctx: &ModelContext, state: &ParamState, i: usize) -> f64 {
    ctx.row_ll_with(state, i, state.radii[i], state.label(i))
}

/// Log prior of the global scale parameters only (α, γ and φ if present).
pub fn log_prior_globals(state: &ParamState, priors: &PriorConfig) -> f64 {
    let mut lp = priors.alpha.ln_pdf(state.alpha) + priors.gamma.ln_pdf(state.gamma);
    if let Some(phi) = state.phi {
        lp += priors.phi.ln_pdf(phi);
    }
    lp
}

#[inline]
pub(crate) fn ln_theta(priors: &PriorConfig, c: usize) -> f64 {
    match priors.theta_c.get(c) {
        Some(&p) if p > 0.0 => p.ln(),
        _ => f64::NEG_INFINITY,
    }
}

/// Sum of truncated-normal log densities and, for Radius+Comms, label log
/// probabilities. Returns −∞ for states outside the support.
pub fn log_prior(state: &ParamState, priors: &PriorConfig) -> f64 {
    let mut lp = log_prior_globals(state, priors);
    for &r in &state.radii {
        lp += priors.radius.ln_pdf(r);
    }
    if let Some(labels) = &state.labels {
        for &c in labels {
            lp += ln_theta(priors, c);
        }
    }
    lp
}

/// Unnormalized log posterior.
pub fn log_posterior(ctx: &ModelContext, state: &ParamState, priors: &PriorConfig) -> f64 {
    let lp = log_prior(state, priors);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    log_likelihood(ctx, state) + lp
}
