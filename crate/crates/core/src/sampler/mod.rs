//! Metropolis-within-Gibbs inference.
//!
//! One sweep is: a joint random-walk proposal for the global scales
//! (α, γ and, for Radius+Comms, φ); then one random-walk radius proposal per
//! node in index order; then, for Radius+Comms, one label proposal per node
//! in index order. Single-node moves are accepted on the node's row
//! likelihood plus its own prior term, since every other factor cancels.
//!
//! Random stream order within a sweep: global normals (α, γ, φ, skipping
//! frozen ones) then the global uniform; for each node the radius normal then
//! its uniform; for each node the label draw then its uniform.

mod io;
mod summary;

pub use io::{read_trace_jsonl, write_trace_jsonl, TraceRecord};
pub use summary::{posterior_mode, quantile, split_rhat, trace_summary, ParamSummary, TraceSummary};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ln_theta, log_likelihood, log_prior, log_prior_globals, ModelContext, ModelKind, ParamState,
    PriorConfig,
};
use crate::rng::{stream, StreamRng};

/// Standard deviations of the random-walk proposals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalScales {
    pub alpha: f64,
    pub gamma: f64,
    pub phi: f64,
    pub radius: f64,
}

/// Global parameters held at their initial value (test harnesses and
/// conditional experiments).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frozen {
    pub alpha: bool,
    pub gamma: bool,
    pub phi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub total_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal: ProposalScales,
    pub adapt: bool,
    pub adapt_window: usize,
    pub seed: u64,
    #[serde(default)]
    pub frozen: Frozen,
}

impl SamplerConfig {
    /// Defaults sized to the prior scales: global steps are a tenth of the
    /// prior location, radius steps a tenth of the mean linked distance.
    pub fn default_for(ctx: &ModelContext, priors: &PriorConfig) -> Self {
        let dbar = crate::model::mean_linked_distance(
            ctx.graph(),
            &crate::graph::pairwise_distances(ctx.graph()),
        );
        let tenth = |p: crate::model::TruncNormal| 0.1 * p.mu.abs().max(p.sigma * 0.1);
        SamplerConfig {
            total_iters: 2000,
            burn_in: 1000,
            thin: 2,
            proposal: ProposalScales {
                alpha: tenth(priors.alpha),
                gamma: tenth(priors.gamma),
                phi: tenth(priors.phi),
                radius: 0.1 * dbar,
            },
            adapt: true,
            adapt_window: 20,
            seed: 0,
            frozen: Frozen::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_iters == 0 {
            return Err(Error::Config("sampler.iters must be positive".into()));
        }
        if self.burn_in >= self.total_iters {
            return Err(Error::Config(format!(
                "sampler.burn_in ({}) must be < sampler.iters ({})",
                self.burn_in, self.total_iters
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("sampler.thin must be >= 1".into()));
        }
        if self.adapt_window == 0 {
            return Err(Error::Config("sampler.adapt_window must be >= 1".into()));
        }
        let p = &self.proposal;
        for (k, v) in [("alpha", p.alpha), ("gamma", p.gamma), ("phi", p.phi), ("r", p.radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("sampler.prop.{k} must be positive")));
            }
        }
        Ok(())
    }

    /// Number of retained samples, ⌊(T − burn_in) / thin⌋.
    pub fn retained(&self) -> usize {
        (self.total_iters - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptRates {
    pub global: f64,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
}

/// Retained samples of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTrace {
    pub kind: ModelKind,
    pub samples: Vec<ParamState>,
    /// 1-based sweep index of each retained sample.
    pub iters: Vec<usize>,
    pub log_posts: Vec<f64>,
    /// Post-burn-in acceptance fractions; absent for traces read back from disk.
    pub accept_rates: Option<AcceptRates>,
    pub map_index: usize,
    /// Log posterior after every sweep, burn-in included.
    #[serde(default)]
    pub sweep_log_posts: Vec<f64>,
    pub final_scales: Option<ProposalScales>,
}

impl PosteriorTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn map_state(&self) -> Result<&ParamState> {
        self.samples
            .get(self.map_index)
            .ok_or_else(|| Error::InvalidInput("empty trace".into()))
    }

    /// Rebuilds a trace from persisted records.
    pub fn from_records(records: Vec<TraceRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("trace file has no records".into()));
        }
        let kind = if records[0].labels.is_some() {
            ModelKind::RadiusComms
        } else {
            ModelKind::Radius
        };
        let mut samples = Vec::with_capacity(records.len());
        let mut iters = Vec::with_capacity(records.len());
        let mut log_posts = Vec::with_capacity(records.len());
        for r in records {
            iters.push(r.iter);
            log_posts.push(r.log_post);
            samples.push(ParamState {
                alpha: r.alpha,
                gamma: r.gamma,
                phi: r.phi,
                radii: r.radii,
                labels: r.labels,
            });
        }
        if samples.iter().any(|s| s.kind() != kind) {
            return Err(Error::InvalidInput("trace mixes model kinds".into()));
        }
        let map_index = argmax(&log_posts);
        Ok(PosteriorTrace {
            kind,
            samples,
            iters,
            log_posts,
            accept_rates: None,
            map_index,
            sweep_log_posts: Vec::new(),
            final_scales: None,
        })
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Chain starting point.
#[derive(Debug, Clone)]
pub enum Init {
    Random,
    State(ParamState),
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws every parameter from its prior.
pub fn sample_prior<R: Rng + ?Sized>(
    n: usize,
    kind: ModelKind,
    priors: &PriorConfig,
    rng: &mut R,
) -> ParamState {
    let alpha = priors.alpha.sample(rng);
    let gamma = priors.gamma.sample(rng);
    let phi = (kind == ModelKind::RadiusComms).then(|| priors.phi.sample(rng));
    let radii = (0..n).map(|_| priors.radius.sample(rng)).collect();
    let labels = (kind == ModelKind::RadiusComms).then(|| {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, &p) in priors.theta_c.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return c;
                    }
                }
                priors.k_comm
            })
            .collect()
    });
    ParamState {
        alpha,
        gamma,
        phi,
        radii,
        labels,
    }
}

/// Global block update with a known current log-likelihood. Returns whether
/// the proposal was accepted and the log-likelihood of the resulting state.
fn global_step<R: Rng + ?Sized>(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &mut ParamState,
    ll: f64,
    scales: &ProposalScales,
    frozen: &Frozen,
    rng: &mut R,
) -> (bool, f64) {
    let mut prop = state.clone();
    if !frozen.alpha {
        prop.alpha = state.alpha + scales.alpha * normal(rng);
    }
    if !frozen.gamma {
        prop.gamma = state.gamma + scales.gamma * normal(rng);
    }
    if let Some(phi) = state.phi {
        if !frozen.phi {
            prop.phi = Some(phi + scales.phi * normal(rng));
        }
    }
    let u: f64 = rng.random();
    let lp_new = log_prior_globals(&prop, priors);
    if lp_new == f64::NEG_INFINITY {
        return (false, ll);
    }
    let ll_new = log_likelihood(ctx, &prop);
    let ratio = (ll_new - ll) + (lp_new - log_prior_globals(state, priors));
    if u.ln() < ratio {
        state.alpha = prop.alpha;
        state.gamma = prop.gamma;
        state.phi = prop.phi;
        (true, ll_new)
    } else {
        (false, ll)
    }
}

/// Joint Metropolis update of α, γ (and φ).
pub fn step_global<R: Rng + ?Sized>(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &mut ParamState,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> bool {
    let ll = log_likelihood(ctx, state);
    global_step(ctx, priors, state, ll, &cfg.proposal, &cfg.frozen, rng).0
}

/// Log acceptance ratio of moving node i's radius to `r_new`, from the row
/// likelihood and the radius prior only.
pub fn radius_log_ratio(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &ParamState,
    i: usize,
    r_new: f64,
) -> f64 {
    let lp_new = priors.radius.ln_pdf(r_new);
    if lp_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let c = state.label(i);
    let r_old = state.radii[i];
    (ctx.row_ll_with(state, i, r_new, c) - ctx.row_ll_with(state, i, r_old, c))
        + (lp_new - priors.radius.ln_pdf(r_old))
}

fn radius_step_with<R: Rng + ?Sized>(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &mut ParamState,
    i: usize,
    sigma: f64,
    rng: &mut R,
) -> bool {
    let r_new = state.radii[i] + sigma * normal(rng);
    let u: f64 = rng.random();
    let ratio = radius_log_ratio(ctx, priors, state, i, r_new);
    if u.ln() < ratio {
        state.radii[i] = r_new;
        true
    } else {
        false
    }
}

/// Metropolis update of node i's radius.
pub fn step_radius<R: Rng + ?Sized>(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &mut ParamState,
    i: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> bool {
    radius_step_with(ctx, priors, state, i, cfg.proposal.radius, rng)
}

/// Log acceptance ratio of relabelling node i to `c_new`.
pub fn label_log_ratio(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &ParamState,
    i: usize,
    c_new: usize,
) -> f64 {
    let c_old = state.label(i);
    let r = state.radii[i];
    let lt = ln_theta(priors, c_new);
    if lt == f64::NEG_INFINITY {
        return lt;
    }
    (ctx.row_ll_with(state, i, r, c_new) - ctx.row_ll_with(state, i, r, c_old))
        + (lt - ln_theta(priors, c_old))
}

/// Metropolis update of node i's community label with a uniform proposal
/// over the other `k_comm` labels. Fails on a Radius state.
pub fn step_label<R: Rng + ?Sized>(
    ctx: &ModelContext,
    priors: &PriorConfig,
    state: &mut ParamState,
    i: usize,
    rng: &mut R,
) -> Result<bool> {
    let c_old = match &state.labels {
        Some(l) => l[i],
        None => return Err(Error::Sampler("label step requires a Radius+Comms state".into())),
    };
    let k = priors.k_comm;
    let draw = rng.random_range(0..k);
    let c_new = if draw >= c_old { draw + 1 } else { draw };
    let u: f64 = rng.random();
    let ratio = label_log_ratio(ctx, priors, state, i, c_new);
    if u.ln() < ratio {
        state.labels.as_mut().expect("checked above")[i] = c_new;
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    accepted: u64,
    proposed: u64,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.proposed += 1;
        self.accepted += ok as u64;
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn adapt_scale(scale: f64, rate: f64) -> f64 {
    if rate > 0.45 {
        scale * 1.1
    } else if rate < 0.15 {
        scale * 0.9
    } else {
        scale
    }
}

/// Result of a chain run, including the best state seen at any sweep.
pub(crate) struct ChainRun {
    pub trace: PosteriorTrace,
    pub best_state: ParamState,
}

fn initial_state(
    ctx: &ModelContext,
    priors: &PriorConfig,
    kind: ModelKind,
    init: Init,
    rng: &mut StreamRng,
) -> Result<ParamState> {
    let n = ctx.node_count();
    match init {
        Init::State(s) => {
            s.validate(n, priors.k_comm)?;
            if s.kind() != kind {
                return Err(Error::Sampler(format!(
                    "initial state is {} but the chain samples {kind}",
                    s.kind()
                )));
            }
            Ok(s)
        }
        Init::Random => {
            for _ in 0..100 {
                let s = sample_prior(n, kind, priors, rng);
                if crate::model::log_posterior(ctx, &s, priors).is_finite() {
                    return Ok(s);
                }
            }
            Err(Error::Sampler(
                "log posterior non-finite at initialization after 100 draws".into(),
            ))
        }
    }
}

pub(crate) fn run_with(
    ctx: &ModelContext,
    priors: &PriorConfig,
    kind: ModelKind,
    cfg: &SamplerConfig,
    init: Init,
    scales: ProposalScales,
    rng: &mut StreamRng,
) -> Result<ChainRun> {
    cfg.validate()?;
    priors.validate()?;
    let n = ctx.node_count();
    let mut state = initial_state(ctx, priors, kind, init, rng)?;
    let mut ll = log_likelihood(ctx, &state);
    let mut lp = ll + log_prior(&state, priors);
    if !lp.is_finite() {
        return Err(Error::Sampler("initial state has non-finite log posterior".into()));
    }
    let mut best_state = state.clone();
    let mut best_log_post = lp;

    let mut scales = scales;
    let all_frozen = cfg.frozen.alpha
        && cfg.frozen.gamma
        && (kind == ModelKind::Radius || cfg.frozen.phi);
    let (mut g_win, mut r_win) = (Tally::default(), Tally::default());
    let (mut g_post, mut r_post, mut l_post) = (Tally::default(), Tally::default(), Tally::default());

    let retained = cfg.retained();
    let mut samples = Vec::with_capacity(retained);
    let mut iters = Vec::with_capacity(retained);
    let mut log_posts = Vec::with_capacity(retained);
    let mut sweep_log_posts = Vec::with_capacity(cfg.total_iters);

    for sweep in 1..=cfg.total_iters {
        let burning = sweep <= cfg.burn_in;
        if !all_frozen {
            let (ok, _) = global_step(ctx, priors, &mut state, ll, &scales, &cfg.frozen, rng);
            g_win.add(ok);
            if !burning {
                g_post.add(ok);
            }
        }
        for i in 0..n {
            let ok = radius_step_with(ctx, priors, &mut state, i, scales.radius, rng);
            r_win.add(ok);
            if !burning {
                r_post.add(ok);
            }
        }
        if kind == ModelKind::RadiusComms && priors.k_comm > 0 {
            for i in 0..n {
                let ok = step_label(ctx, priors, &mut state, i, rng)?;
                if !burning {
                    l_post.add(ok);
                }
            }
        }
        ll = log_likelihood(ctx, &state);
        lp = ll + log_prior(&state, priors);
        sweep_log_posts.push(lp);
        if lp > best_log_post {
            best_log_post = lp;
            best_state.clone_from(&state);
        }
        if cfg.adapt && burning && sweep % cfg.adapt_window == 0 {
            if g_win.proposed > 0 {
                let f = adapt_scale(1.0, g_win.rate());
                scales.alpha *= f;
                scales.gamma *= f;
                scales.phi *= f;
            }
            if r_win.proposed > 0 {
                scales.radius = adapt_scale(scales.radius, r_win.rate());
            }
            g_win = Tally::default();
            r_win = Tally::default();
        }
        if !burning && (sweep - cfg.burn_in) % cfg.thin == 0 {
            samples.push(state.clone());
            iters.push(sweep);
            log_posts.push(lp);
        }
    }
    let map_index = argmax(&log_posts);
    let trace = PosteriorTrace {
        kind,
        samples,
        iters,
        log_posts,
        accept_rates: Some(AcceptRates {
            global: g_post.rate(),
            radius: r_post.rate(),
            label: (kind == ModelKind::RadiusComms).then(|| l_post.rate()),
        }),
        map_index,
        sweep_log_posts,
        final_scales: Some(scales),
    };
    Ok(ChainRun { trace, best_state })
}

/// Runs one chain seeded from `cfg.seed`.
pub fn run_chain(
    ctx: &ModelContext,
    priors: &PriorConfig,
    kind: ModelKind,
    cfg: &SamplerConfig,
    init: Init,
) -> Result<PosteriorTrace> {
    let mut rng = stream(cfg.seed);
    Ok(run_with(ctx, priors, kind, cfg, init, cfg.proposal, &mut rng)?.trace)
}

/// Runs a short chain from a random start and returns the highest
/// log-posterior state visited, the starting state included.
pub fn initialize_map(
    ctx: &ModelContext,
    priors: &PriorConfig,
    kind: ModelKind,
    cfg_short: &SamplerConfig,
) -> Result<ParamState> {
    let mut rng = stream(cfg_short.seed);
    Ok(run_with(ctx, priors, kind, cfg_short, Init::Random, cfg_short.proposal, &mut rng)?.best_state)
}

/// Two-stage fit: a MAP-initialization chain, then the main chain started
/// from its best state with the proposal scales it adapted. Both stages
/// draw from the single stream seeded by `cfg.seed`.
pub fn fit(
    ctx: &ModelContext,
    priors: &PriorConfig,
    kind: ModelKind,
    init_cfg: &SamplerConfig,
    cfg: &SamplerConfig,
) -> Result<PosteriorTrace> {
    let mut rng = stream(cfg.seed);
    let first = run_with(ctx, priors, kind, init_cfg, Init::Random, init_cfg.proposal, &mut rng)?;
    let scales = first.trace.final_scales.unwrap_or(cfg.proposal);
    Ok(run_with(ctx, priors, kind, cfg, Init::State(first.best_state), scales, &mut rng)?.trace)
}

/// Iteration budget for a two-stage [`fit`]; proposal scales default to
/// [`SamplerConfig::default_for`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPlan {
    pub init_iters: usize,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt_window: usize,
    #[serde(default)]
    pub proposal: Option<ProposalScales>,
    /// Adapt proposal scales during the main chain's burn-in.
    pub adapt: bool,
    #[serde(default)]
    pub frozen: Frozen,
}

impl Default for FitPlan {
    fn default() -> Self {
        FitPlan {
            init_iters: 500,
            iters: 2000,
            burn_in: 1000,
            thin: 2,
            adapt_window: 20,
            proposal: None,
            adapt: true,
            frozen: Frozen::default(),
        }
    }
}

impl FitPlan {
    /// The (initialization, main) sampler configurations for one seed. The
    /// initialization chain adapts for its whole length.
    pub fn configs(
        &self,
        ctx: &ModelContext,
        priors: &PriorConfig,
        seed: u64,
    ) -> (SamplerConfig, SamplerConfig) {
        let mut main = SamplerConfig::default_for(ctx, priors);
        if let Some(p) = self.proposal {
            main.proposal = p;
        }
        main.total_iters = self.iters;
        main.burn_in = self.burn_in;
        main.thin = self.thin;
        main.adapt_window = self.adapt_window;
        main.seed = seed;
        main.frozen = self.frozen;
        main.adapt = self.adapt;
        let mut init = main.clone();
        init.adapt = true;
        init.total_iters = self.init_iters.max(1);
        init.burn_in = init.total_iters - 1;
        init.thin = 1;
        (init, main)
    }
}

/// [`fit`] driven by a [`FitPlan`].
pub fn fit_with_plan(
    ctx: &ModelContext,
    priors: &PriorConfig,
    kind: ModelKind,
    plan: &FitPlan,
    seed: u64,
) -> Result<PosteriorTrace> {
    let (init, main) = plan.configs(ctx, priors, seed);
    fit(ctx, priors, kind, &init, &main)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SpatialGraph;
    use crate::model::{log_posterior, row_log_likelihood, TruncNormal};
    use rand::SeedableRng;

    fn small_graph() -> SpatialGraph {
        let coords = vec![[0.0, 0.0], [1.0, 0.2], [0.4, 1.1], [2.0, 1.5], [1.2, 2.2]];
        let ids = (0..5).map(|i| i.to_string()).collect();
        SpatialGraph::new(ids, coords, [(0, 1), (0, 2), (1, 2), (3, 4), (2, 4)]).unwrap()
    }

    fn priors(k_comm: usize) -> PriorConfig {
        PriorConfig {
            alpha: TruncNormal { mu: 0.5, sigma: 1.0 },
            gamma: TruncNormal { mu: 1.0, sigma: 1.0 },
            phi: TruncNormal { mu: 1.0, sigma: 1.0 },
            radius: TruncNormal { mu: 0.5, sigma: 0.5 },
            theta_c: crate::model::uniform_theta(k_comm),
            k_comm,
        }
    }

    fn cfg() -> SamplerConfig {
        SamplerConfig {
            total_iters: 50,
            burn_in: 10,
            thin: 4,
            proposal: ProposalScales { alpha: 0.1, gamma: 0.1, phi: 0.1, radius: 0.1 },
            adapt: true,
            adapt_window: 5,
            seed: 9,
            frozen: Frozen::default(),
        }
    }

    #[test]
    fn radius_ratio_equals_full_posterior_difference() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(2);
        let s = ParamState::radius_comms(0.7, 1.3, 0.4, vec![0.3, 0.8, 0.5, 1.1, 0.2], vec![0, 1, 1, 2, 0]);
        for i in 0..5 {
            let mut t = s.clone();
            t.radii[i] = 0.9;
            let full = log_posterior(&ctx, &t, &pr) - log_posterior(&ctx, &s, &pr);
            let row = radius_log_ratio(&ctx, &pr, &s, i, 0.9);
            assert!((full - row).abs() < 1e-9, "node {i}: {full} vs {row}");
            for c in 0..=2 {
                let mut t = s.clone();
                t.labels.as_mut().unwrap()[i] = c;
                let full = log_posterior(&ctx, &t, &pr) - log_posterior(&ctx, &s, &pr);
                let row = label_log_ratio(&ctx, &pr, &s, i, c);
                assert!((full - row).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn half_row_sum_is_full_likelihood() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let s = ParamState::radius(0.7, 1.3, vec![0.3, 0.8, 0.5, 1.1, 0.2]);
        let rows: f64 = (0..5).map(|i| row_log_likelihood(&ctx, &s, i)).sum();
        assert!((0.5 * rows - log_likelihood(&ctx, &s)).abs() < 1e-9);
    }

    #[test]
    fn identical_proposals_always_accepted() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(2);
        let s = ParamState::radius(0.7, 1.3, vec![0.3, 0.8, 0.5, 1.1, 0.2]);
        assert_eq!(radius_log_ratio(&ctx, &pr, &s, 2, 0.5), 0.0);
        let mut st = s.clone();
        let mut c = cfg();
        c.proposal = ProposalScales { alpha: 1e-300, gamma: 1e-300, phi: 1e-300, radius: 1e-300 };
        let mut rng = StreamRng::seed_from_u64(1);
        for _ in 0..50 {
            assert!(step_global(&ctx, &pr, &mut st, &c, &mut rng));
        }
    }

    #[test]
    fn nonpositive_proposals_rejected_and_state_untouched() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(2);
        let s = ParamState::radius(1e-6, 1.3, vec![1e-6; 5]);
        let mut c = cfg();
        c.proposal = ProposalScales { alpha: 100.0, gamma: 1e-9, phi: 1.0, radius: 100.0 };
        let mut rng = StreamRng::seed_from_u64(2);
        let mut rejected = 0;
        for _ in 0..200 {
            let mut st = s.clone();
            if !step_global(&ctx, &pr, &mut st, &c, &mut rng) {
                rejected += 1;
                assert_eq!(st, s);
            } else {
                assert!(st.alpha > 0.0);
            }
            let mut st = s.clone();
            if !step_radius(&ctx, &pr, &mut st, 0, &c, &mut rng) {
                assert_eq!(st, s);
            } else {
                assert!(st.radii[0] > 0.0);
            }
        }
        assert!(rejected > 50);
        assert_eq!(radius_log_ratio(&ctx, &pr, &s, 0, -0.1), f64::NEG_INFINITY);
        assert_eq!(radius_log_ratio(&ctx, &pr, &s, 0, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn label_step_requires_comms() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let mut s = ParamState::radius(0.7, 1.3, vec![0.3; 5]);
        let mut rng = StreamRng::seed_from_u64(3);
        assert!(step_label(&ctx, &priors(2), &mut s, 0, &mut rng).is_err());
    }

    #[test]
    fn single_community_label_toggles() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(1);
        let mut s = ParamState::radius_comms(0.7, 1.3, 0.4, vec![0.3; 5], vec![0; 5]);
        let mut rng = StreamRng::seed_from_u64(4);
        for _ in 0..100 {
            let before = s.label(1);
            let ok = step_label(&ctx, &pr, &mut s, 1, &mut rng).unwrap();
            if ok {
                assert_eq!(s.label(1), 1 - before);
            }
        }
    }

    #[test]
    fn zero_phi_makes_labels_free() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(3);
        let s = ParamState::radius_comms(0.7, 1.3, 0.0, vec![0.3; 5], vec![0, 1, 2, 3, 1]);
        for c in 0..=3 {
            assert_eq!(label_log_ratio(&ctx, &pr, &s, 2, c), 0.0);
        }
    }

    #[test]
    fn retained_count_and_determinism() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(2);
        let c = cfg();
        let a = run_chain(&ctx, &pr, ModelKind::RadiusComms, &c, Init::Random).unwrap();
        let b = run_chain(&ctx, &pr, ModelKind::RadiusComms, &c, Init::Random).unwrap();
        assert_eq!(a.len(), (50 - 10) / 4);
        assert_eq!(a, b);
        assert_eq!(a.log_posts[a.map_index], a.log_posts.iter().cloned().fold(f64::MIN, f64::max));
        for (s, lp) in a.samples.iter().zip(&a.log_posts) {
            assert!((log_posterior(&ctx, s, &pr) - lp).abs() < 1e-9);
        }
        let mut one = c.clone();
        one.total_iters = one.burn_in + one.thin;
        assert_eq!(run_chain(&ctx, &pr, ModelKind::Radius, &one, Init::Random).unwrap().len(), 1);
    }

    #[test]
    fn map_init_not_worse_than_start() {
        let g = small_graph();
        let ctx = ModelContext::new(&g);
        let pr = priors(2);
        let mut c = cfg();
        c.total_iters = 1;
        c.burn_in = 0;
        c.thin = 1;
        // Replay the random start from the same stream.
        let mut rng = stream(c.seed);
        let start = initial_state(&ctx, &pr, ModelKind::Radius, Init::Random, &mut rng).unwrap();
        let run = run_chain(&ctx, &pr, ModelKind::Radius, &c, Init::Random).unwrap();
        let best = initialize_map(&ctx, &pr, ModelKind::Radius, &c).unwrap();
        let lp_best = log_posterior(&ctx, &best, &pr);
        let lp_start = log_posterior(&ctx, &start, &pr);
        assert!(lp_best >= lp_start);
        assert_eq!(lp_best, lp_start.max(run.log_posts[0]));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.burn_in = 50;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.thin = 0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.proposal.radius = 0.0;
        assert!(c.validate().is_err());
    }
}
