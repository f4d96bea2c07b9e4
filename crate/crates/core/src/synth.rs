//! Synthetic networks drawn from the model and the prior-sensitivity
//! experiment built on them.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pairwise_distances, SpatialGraph};
use crate::model::{beta_term, sigmoid, DegreeTerm, ModelContext, ModelKind, ParamState, PriorConfig, TruncNormal};
use crate::rng::{derive_seed, stream};
use crate::sampler::{fit_with_plan, posterior_mode, quantile, FitPlan, PosteriorTrace};

/// How the degree term is handled while drawing edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    /// Degree term fixed at zero.
    #[default]
    Disabled,
    /// Iterate edge draws and degree updates until the degrees settle.
    FixedPoint,
}

fn unit_square() -> [f64; 2] {
    [1.0, 1.0]
}

fn one() -> f64 {
    1.0
}

/// Parameters of one synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub n: usize,
    /// Width and height of the placement rectangle.
    #[serde(default = "unit_square")]
    pub region: [f64; 2],
    pub alpha: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    /// Community weight; when present, labels are drawn and β enters.
    #[serde(default)]
    pub phi: Option<f64>,
    pub radius: TruncNormal,
    /// Label distribution over 0..=K; uniform over ⌈n/10⌉ communities if absent.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub degree_mode: DegreeMode,
    /// Starting degree for every node in fixed-point mode.
    #[serde(default)]
    pub target_mean_degree: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.region[0] > 0.0 && self.region[1] > 0.0)
            || !self.region.iter().all(|v| v.is_finite())
        {
            return bad("region must have positive finite width and height".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive".into());
        }
        if let Some(phi) = self.phi {
            if !(phi >= 0.0 && phi.is_finite()) {
                return bad("phi must be nonnegative".into());
            }
        }
        TruncNormal::new(self.radius.mu, self.radius.sigma)?;
        if let Some(t) = &self.theta {
            if t.len() < 2 || t.iter().any(|&p| !(p >= 0.0)) {
                return bad("theta needs at least two nonnegative entries".into());
            }
            let s: f64 = t.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return bad(format!("theta sums to {s}, not 1"));
            }
        }
        if self.degree_mode == DegreeMode::FixedPoint {
            match self.target_mean_degree {
                Some(k) if k > 0.0 && k.is_finite() => {}
                _ => return bad("fixed_point mode needs a positive target_mean_degree".into()),
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        if self.phi.is_some() {
            ModelKind::RadiusComms
        } else {
            ModelKind::Radius
        }
    }

    pub fn theta_or_default(&self) -> Vec<f64> {
        self.theta
            .clone()
            .unwrap_or_else(|| crate::model::uniform_theta(crate::model::default_k_comm(self.n)))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GenSpec { seed, ..self.clone() }
    }
}

/// A generated graph with its generating parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    #[serde(skip)]
    pub graph: Option<SpatialGraph>,
    pub truth: ParamState,
    /// Edge-draw rounds (1 unless fixed-point mode).
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl Generated {
    pub fn graph(&self) -> &SpatialGraph {
        self.graph.as_ref().expect("generated graph present")
    }
}

fn draw_label<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, &p) in theta.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    theta.len() - 1
}

/// η_ij without the degree term.
fn spatial_logit(truth: &ParamState, coords: &[[f64; 2]], i: usize, j: usize) -> f64 {
    let d = (coords[i][0] - coords[j][0]).hypot(coords[i][1] - coords[j][1]);
    let mut eta = (truth.radii[i] + truth.radii[j] - d) / truth.alpha;
    if let Some(phi) = truth.phi {
        eta += beta_term(truth.label(i), truth.label(j), phi);
    }
    eta
}

/// Draws one network. Stream order: coordinates, radii, labels, then one
/// uniform per pair (i < j, row-major) per edge-draw round.
pub fn generate_network(spec: &GenSpec) -> Result<Generated> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = stream(spec.seed);
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            [x * spec.region[0], y * spec.region[1]]
        })
        .collect();
    let radii: Vec<f64> = (0..n).map(|_| spec.radius.sample(&mut rng)).collect();
    let truth = match spec.phi {
        Some(phi) => {
            let theta = spec.theta_or_default();
            let labels = (0..n).map(|_| draw_label(&theta, &mut rng)).collect();
            ParamState::radius_comms(spec.alpha, spec.gamma, phi, radii, labels)
        }
        None => ParamState::radius(spec.alpha, spec.gamma, radii),
    };
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            base[i * n + j] = spatial_logit(&truth, &coords, i, j);
        }
    }
    let draw = |rng: &mut crate::rng::StreamRng, pa: &dyn Fn(usize, usize) -> f64| {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = sigmoid(base[i * n + j] + pa(i, j));
                let u: f64 = rng.random();
                if u < p {
                    edges.push((i, j));
                }
            }
        }
        edges
    };
    let mut warnings = Vec::new();
    let (edges, iterations, converged) = match spec.degree_mode {
        DegreeMode::Disabled => (draw(&mut rng, &|_, _| 0.0), 1, true),
        DegreeMode::FixedPoint => {
            let k0 = spec.target_mean_degree.expect("validated");
            let mut k = vec![k0; n];
            // Uniform degrees make every product equal, so M cancels them.
            let mut m = k0 * k0 / (k0 * n as f64);
            let mut edges = Vec::new();
            let mut converged = false;
            let mut rounds = 0;
            while rounds < 20 {
                rounds += 1;
                let total: f64 = k.iter().sum();
                let kk = k.clone();
                let gamma = spec.gamma;
                let mm = m;
                edges = draw(&mut rng, &move |i, j| {
                    if total > 0.0 {
                        (kk[i] * kk[j] / total - mm) / gamma
                    } else {
                        0.0
                    }
                });
                let g = SpatialGraph::new(ids.clone(), coords.clone(), edges.clone())?;
                let new_k: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
                let change: f64 = k.iter().zip(&new_k).map(|(a, b)| (a - b).abs()).sum();
                let scale: f64 = k.iter().sum::<f64>().max(1.0);
                m = crate::model::compute_m(&g).unwrap_or(m);
                k = new_k;
                if change / scale < 0.05 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                warnings.push(format!(
                    "degree fixed point did not settle within {rounds} rounds; returning the last draw"
                ));
            }
            (edges, rounds, converged)
        }
    };
    let graph = SpatialGraph::new(ids, coords, edges)?;
    Ok(Generated {
        graph: Some(graph),
        truth,
        iterations,
        converged,
        warnings,
    })
}

/// Networks for seeds derived from `spec.seed` and indices `0..count`.
pub fn generate_batch(spec: &GenSpec, count: usize) -> Result<Vec<(GenSpec, Generated)>> {
    (0..count)
        .into_par_iter()
        .map(|k| {
            let s = spec.with_seed(derive_seed(spec.seed, k as u64));
            let g = generate_network(&s)?;
            Ok((s, g))
        })
        .collect()
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a GenSpec,
    truth: &'a ParamState,
    degree_mode: DegreeMode,
    iterations: usize,
    converged: bool,
    warnings: &'a [String],
}

/// Writes `truth.json` content: the spec, the generating state and the
/// degree-handling outcome.
pub fn write_truth<W: Write>(spec: &GenSpec, gen: &Generated, w: W) -> Result<()> {
    let t = TruthFile {
        spec,
        truth: &gen.truth,
        degree_mode: spec.degree_mode,
        iterations: gen.iterations,
        converged: gen.converged,
        warnings: &gen.warnings,
    };
    serde_json::to_writer_pretty(w, &t)?;
    Ok(())
}

/// Overrides applied on top of data-scaled default priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSetting {
    pub label: String,
    #[serde(default)]
    pub alpha: Option<TruncNormal>,
    #[serde(default)]
    pub gamma: Option<TruncNormal>,
    #[serde(default)]
    pub phi: Option<TruncNormal>,
    #[serde(default)]
    pub radius: Option<TruncNormal>,
    #[serde(default)]
    pub k_comm: Option<usize>,
}

impl PriorSetting {
    pub fn apply(&self, mut base: PriorConfig) -> PriorConfig {
        if let Some(k) = self.k_comm {
            base = base.with_k_comm(k);
        }
        base.alpha = self.alpha.unwrap_or(base.alpha);
        base.gamma = self.gamma.unwrap_or(base.gamma);
        base.phi = self.phi.unwrap_or(base.phi);
        base.radius = self.radius.unwrap_or(base.radius);
        base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub networks: usize,
    pub plan: FitPlan,
    pub degree_term: DegreeTerm,
    pub histogram_bins: usize,
    pub seed: u64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            networks: 10,
            plan: FitPlan::default(),
            degree_term: DegreeTerm::Disabled,
            histogram_bins: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|b| lo + width * b as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub truth: f64,
    pub mode: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    /// |mode − truth| / truth.
    pub rel_error: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFit {
    pub network: usize,
    pub gen_seed: u64,
    pub fit_seed: u64,
    pub edges: usize,
    pub params: Vec<ParamEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingReport {
    pub label: String,
    pub fits: Vec<NetworkFit>,
    /// Mean over networks of (mode − mode under the first setting) / truth,
    /// per parameter in the order of `params`.
    pub mode_shift: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub spec: GenSpec,
    pub settings: Vec<SettingReport>,
}

fn estimates(
    trace: &PosteriorTrace,
    truth: &ParamState,
    include_gamma: bool,
    bins: usize,
) -> Vec<ParamEstimate> {
    let mut cols: Vec<(&str, f64, Vec<f64>)> =
        vec![("alpha", truth.alpha, trace.samples.iter().map(|s| s.alpha).collect())];
    if include_gamma {
        cols.push(("gamma", truth.gamma, trace.samples.iter().map(|s| s.gamma).collect()));
    }
    if let Some(phi) = truth.phi {
        cols.push((
            "phi",
            phi,
            trace.samples.iter().map(|s| s.phi.unwrap_or(f64::NAN)).collect(),
        ));
    }
    cols.into_iter()
        .map(|(name, t, v)| {
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            let mode = posterior_mode(&v);
            ParamEstimate {
                name: name.into(),
                truth: t,
                mode,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                q025: quantile(&sorted, 0.025),
                q975: quantile(&sorted, 0.975),
                rel_error: if t != 0.0 { (mode - t).abs() / t.abs() } else { mode.abs() },
                histogram: Histogram::of(&v, bins),
            }
        })
        .collect()
}

/// Generates `cfg.networks` networks from `spec` and fits each under every
/// prior setting with a shared fit seed per network.
pub fn prior_sensitivity_experiment(
    spec: &GenSpec,
    settings: &[PriorSetting],
    cfg: &SensitivityConfig,
) -> Result<SensitivityReport> {
    if settings.len() < 2 {
        return Err(Error::InvalidInput("need at least two prior settings".into()));
    }
    spec.validate()?;
    let base = spec.with_seed(cfg.seed);
    let nets = generate_batch(&base, cfg.networks)?;
    let include_gamma =
        cfg.degree_term == DegreeTerm::Enabled && spec.degree_mode == DegreeMode::FixedPoint;
    let per_net: Vec<Vec<NetworkFit>> = nets
        .par_iter()
        .enumerate()
        .map(|(k, (s, gen))| {
            let g = gen.graph();
            let d = pairwise_distances(g);
            let ctx = ModelContext::from_parts(g, &d, cfg.degree_term);
            let fit_seed = derive_seed(s.seed, 1);
            settings
                .iter()
                .map(|set| {
                    let mut base = PriorConfig::default_for(g, &d);
                    if let Some(t) = &spec.theta {
                        base = base.with_k_comm(t.len() - 1);
                    }
                    let priors = set.apply(base);
                    priors.validate()?;
                    let trace = fit_with_plan(&ctx, &priors, spec.kind(), &cfg.plan, fit_seed)?;
                    Ok(NetworkFit {
                        network: k,
                        gen_seed: s.seed,
                        fit_seed,
                        edges: g.edge_count(),
                        params: estimates(&trace, &gen.truth, include_gamma, cfg.histogram_bins),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(settings.len());
    for (si, set) in settings.iter().enumerate() {
        let fits: Vec<NetworkFit> = per_net.iter().map(|v| v[si].clone()).collect();
        let names: Vec<String> = fits[0].params.iter().map(|p| p.name.clone()).collect();
        let mode_shift = names
            .iter()
            .enumerate()
            .map(|(pi, name)| {
                let s: f64 = per_net
                    .iter()
                    .map(|v| (v[si].params[pi].mode - v[0].params[pi].mode) / v[0].params[pi].truth)
                    .sum();
                (name.clone(), s / per_net.len() as f64)
            })
            .collect();
        out.push(SettingReport {
            label: set.label.clone(),
            fits,
            mode_shift,
        });
    }
    Ok(SensitivityReport {
        spec: base,
        settings: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GenSpec {
        GenSpec {
            n: 100,
            region: [1.0, 1.0],
            alpha: 1e9,
            gamma: 1.0,
            phi: None,
            radius: TruncNormal { mu: 1e-9, sigma: 1e-9 },
            theta: None,
            degree_mode: DegreeMode::Disabled,
            target_mean_degree: None,
            seed: 1,
        }
    }

    #[test]
    fn flat_logits_give_half_density() {
        let g = generate_network(&spec()).unwrap();
        let pairs = 4950.0f64;
        let m = g.graph().edge_count() as f64;
        let se = (pairs * 0.25).sqrt();
        assert!((m - pairs * 0.5).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn deterministic_and_truth_valid() {
        let mut s = spec();
        s.alpha = 0.1;
        s.radius = TruncNormal { mu: 0.1, sigma: 0.05 };
        s.phi = Some(1.5);
        let a = generate_network(&s).unwrap();
        let b = generate_network(&s).unwrap();
        assert_eq!(a.graph(), b.graph());
        assert_eq!(a.truth, b.truth);
        a.truth.validate(100, crate::model::default_k_comm(100)).unwrap();
        let c = generate_network(&s.with_seed(2)).unwrap();
        assert_ne!(a.graph(), c.graph());
    }

    #[test]
    fn edge_count_within_poisson_binomial_band() {
        let mut s = spec();
        s.alpha = 0.2;
        s.radius = TruncNormal { mu: 0.1, sigma: 0.1 };
        for seed in 0..5 {
            let s = s.with_seed(seed);
            let gen = generate_network(&s).unwrap();
            let g = gen.graph();
            let (mut mean, mut var) = (0.0f64, 0.0f64);
            for i in 0..s.n {
                for j in (i + 1)..s.n {
                    let p = sigmoid(spatial_logit(&gen.truth, g.coords(), i, j));
                    mean += p;
                    var += p * (1.0 - p);
                }
            }
            assert!((g.edge_count() as f64 - mean).abs() < 4.0 * var.sqrt());
        }
    }

    #[test]
    fn fixed_point_mode_runs() {
        let mut s = spec();
        s.alpha = 0.2;
        s.radius = TruncNormal { mu: 0.1, sigma: 0.05 };
        s.degree_mode = DegreeMode::FixedPoint;
        s.target_mean_degree = Some(8.0);
        s.gamma = 0.5;
        let g = generate_network(&s).unwrap();
        assert!(g.iterations >= 1 && g.iterations <= 20);
        assert_eq!(g.converged, g.warnings.is_empty());
        s.target_mean_degree = None;
        assert!(generate_network(&s).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = spec();
        s.n = 1;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.region = [0.0, 1.0];
        assert!(s.validate().is_err());
        let mut s = spec();
        s.theta = Some(vec![0.5, 0.6]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::of(&[0.0, 0.5, 1.0, 1.0], 4);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts, vec![1, 0, 1, 2]);
        let flat = Histogram::of(&[2.0; 3], 2);
        assert_eq!(flat.counts.iter().sum::<usize>(), 3);
    }
}
