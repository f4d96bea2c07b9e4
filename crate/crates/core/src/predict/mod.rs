//! Link prediction and its evaluation: posterior-predictive and MAP scores,
//! closed-form baselines, ROC AUC, quantile breakdowns and k-fold
//! cross-validation.

mod baseline;

pub use baseline::{fit_baseline, BaselineKind, BaselineModel, EmpiricalBins, EMPDIST_BINS};

use std::io::Write;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pairwise_distances, DistanceMatrix, SpatialGraph};
use crate::model::{sigmoid, DegreeTerm, ModelContext, ModelKind, PriorConfig};
use crate::rng::{derive_seed, stream};
use crate::sampler::{fit_with_plan, FitPlan, PosteriorTrace};

/// One train/test split.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: SpatialGraph,
    pub test_edges: Vec<(usize, usize)>,
}

/// Splits the edges uniformly at random into `folds` disjoint groups of
/// near-equal size.
pub fn kfold_split(g: &SpatialGraph, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if folds > g.edge_count() {
        return Err(Error::InvalidInput(format!(
            "{folds} folds requested but the graph has only {} edges",
            g.edge_count()
        )));
    }
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut stream(seed));
    let mut groups = vec![Vec::new(); folds];
    for (k, e) in edges.into_iter().enumerate() {
        groups[k % folds].push(e);
    }
    Ok(groups
        .into_iter()
        .map(|mut test_edges| {
            test_edges.sort_unstable();
            Fold {
                train: g.without_edges(&test_edges),
                test_edges,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub i: usize,
    pub j: usize,
    pub score: f64,
    pub truth: bool,
    pub distance: f64,
    /// k_i k_j on the training graph.
    pub deg_product: f64,
}

/// Scored test pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkScoreSet {
    pub pairs: Vec<ScoredPair>,
}

impl LinkScoreSet {
    /// Checks scores lie in [0, 1], no self-pairs and no repeated pair.
    pub fn new(pairs: Vec<ScoredPair>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if p.i == p.j {
                return Err(Error::InvalidInput(format!("self-pair ({}, {})", p.i, p.j)));
            }
            if !(0.0..=1.0).contains(&p.score) {
                return Err(Error::InvalidInput(format!(
                    "score {} for pair ({}, {}) outside [0, 1]",
                    p.score, p.i, p.j
                )));
            }
            if !seen.insert((p.i.min(p.j), p.i.max(p.j))) {
                return Err(Error::InvalidInput(format!("duplicate pair ({}, {})", p.i, p.j)));
            }
        }
        Ok(LinkScoreSet { pairs })
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.truth).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }

    /// CSV with header `i,j,score,truth,distance,deg_product`; endpoints are
    /// written as node ids of `g`.
    pub fn write_csv<W: Write>(&self, g: &SpatialGraph, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let wrap = |e: csv::Error| Error::InvalidInput(format!("writing scores: {e}"));
        out.write_record(["i", "j", "score", "truth", "distance", "deg_product"])
            .map_err(wrap)?;
        for p in &self.pairs {
            out.write_record([
                g.node_ids()[p.i].clone(),
                g.node_ids()[p.j].clone(),
                p.score.to_string(),
                (p.truth as u8).to_string(),
                p.distance.to_string(),
                p.deg_product.to_string(),
            ])
            .map_err(wrap)?;
        }
        out.flush()
            .map_err(|e| Error::InvalidInput(format!("writing scores: {e}")))
    }
}

fn check_pair(ctx: &ModelContext, i: usize, j: usize) -> Result<()> {
    let n = ctx.node_count();
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidInput(format!("invalid pair ({i}, {j}) for {n} nodes")));
    }
    Ok(())
}

/// Posterior-predictive link probability: the mean of σ(η_ij) over the
/// retained samples.
pub fn predictive_link_probability(
    trace: &PosteriorTrace,
    ctx: &ModelContext,
    i: usize,
    j: usize,
) -> Result<f64> {
    Ok(predictive_scores(trace, ctx, &[(i, j)])?[0])
}

/// σ(η_ij) at the MAP sample.
pub fn map_link_probability(
    trace: &PosteriorTrace,
    ctx: &ModelContext,
    i: usize,
    j: usize,
) -> Result<f64> {
    Ok(map_scores(trace, ctx, &[(i, j)])?[0])
}

/// [`predictive_link_probability`] for many pairs at once.
pub fn predictive_scores(
    trace: &PosteriorTrace,
    ctx: &ModelContext,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("empty posterior trace".into()));
    }
    for &(i, j) in pairs {
        check_pair(ctx, i, j)?;
    }
    let inv = 1.0 / trace.len() as f64;
    Ok(pairs
        .par_iter()
        .map(|&(i, j)| {
            let s: f64 = trace.samples.iter().map(|st| sigmoid(ctx.logit_raw(st, i, j))).sum();
            (s * inv).clamp(0.0, 1.0)
        })
        .collect())
}

/// [`map_link_probability`] for many pairs at once.
pub fn map_scores(
    trace: &PosteriorTrace,
    ctx: &ModelContext,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let st = trace.map_state()?;
    pairs
        .iter()
        .map(|&(i, j)| {
            check_pair(ctx, i, j)?;
            Ok(sigmoid(ctx.logit_raw(st, i, j)))
        })
        .collect()
}

/// Area under the ROC curve from scores and labels, by the rank-sum
/// statistic with ties counted ½.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // Ranks k+1..=end share their average.
        let mid = (k + 1 + end) as f64 / 2.0;
        for &idx in &order[k..end] {
            if truth[idx] {
                rank_sum += mid;
            }
        }
        k = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn roc_auc(set: &LinkScoreSet) -> Result<f64> {
    let scores: Vec<f64> = set.pairs.iter().map(|p| p.score).collect();
    let truth: Vec<bool> = set.pairs.iter().map(|p| p.truth).collect();
    auc(&scores, &truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantileAxis {
    Distance,
    DegreeProduct,
}

impl QuantileAxis {
    fn value(self, p: &ScoredPair) -> f64 {
        match self {
            QuantileAxis::Distance => p.distance,
            QuantileAxis::DegreeProduct => p.deg_product,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBin {
    pub bin: usize,
    /// Smallest and largest axis value among the pairs in the bin.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
    /// Absent when the bin has no negatives.
    pub auc: Option<f64>,
}

/// Per-bin AUC along `axis`.
///
/// Positives are ranked by axis value and split into `bins` groups whose
/// sizes differ by at most one. The bin edges are the axis values of the
/// first positive in each group; negatives are placed by those edges, going
/// to the highest bin whose edge does not exceed their value.
pub fn quantile_auc(set: &LinkScoreSet, axis: QuantileAxis, bins: usize) -> Result<Vec<QuantileBin>> {
    if bins == 0 {
        return Err(Error::InvalidInput("need at least one quantile bin".into()));
    }
    let mut pos: Vec<&ScoredPair> = set.pairs.iter().filter(|p| p.truth).collect();
    if pos.len() < bins {
        return Err(Error::InvalidInput(format!(
            "{} positive pairs cannot fill {bins} quantile bins",
            pos.len()
        )));
    }
    pos.sort_by(|a, b| {
        axis.value(a)
            .total_cmp(&axis.value(b))
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });
    let total = pos.len();
    let start = |b: usize| b * total / bins;
    let edges: Vec<f64> = (1..bins).map(|b| axis.value(pos[start(b)])).collect();
    let mut members: Vec<Vec<&ScoredPair>> = vec![Vec::new(); bins];
    for (b, group) in members.iter_mut().enumerate() {
        group.extend_from_slice(&pos[start(b)..start(b + 1)]);
    }
    for p in set.pairs.iter().filter(|p| !p.truth) {
        members[edges.partition_point(|&e| e <= axis.value(p))].push(p);
    }
    Ok(members
        .iter()
        .enumerate()
        .map(|(b, group)| {
            let positives = group.iter().filter(|p| p.truth).count();
            let negatives = group.len() - positives;
            let vals = group.iter().map(|p| axis.value(p));
            let lower = vals.clone().min_by(f64::total_cmp);
            let upper = vals.max_by(f64::total_cmp);
            let auc = (negatives > 0).then(|| {
                let s: Vec<f64> = group.iter().map(|p| p.score).collect();
                let t: Vec<bool> = group.iter().map(|p| p.truth).collect();
                auc(&s, &t).expect("bin has both classes")
            });
            QuantileBin {
                bin: b,
                lower,
                upper,
                positives,
                negatives,
                auc,
            }
        })
        .collect())
}

/// A link predictor evaluated by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Radius,
    RadiusComms,
    PA,
    ExpDist,
    EmpDist,
}

impl Method {
    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            Method::Radius => Some(ModelKind::Radius),
            Method::RadiusComms => Some(ModelKind::RadiusComms),
            _ => None,
        }
    }

    pub fn baseline_kind(self) -> Option<BaselineKind> {
        match self {
            Method::PA => Some(BaselineKind::PA),
            Method::ExpDist => Some(BaselineKind::ExpDist),
            Method::EmpDist => Some(BaselineKind::EmpDist),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Radius => "Radius",
            Method::RadiusComms => "RadiusComms",
            Method::PA => "PA",
            Method::ExpDist => "ExpDist",
            Method::EmpDist => "EmpDist",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "radius" => Ok(Method::Radius),
            "radiuscomms" => Ok(Method::RadiusComms),
            "pa" => Ok(Method::PA),
            "expdist" => Ok(Method::ExpDist),
            "empdist" => Ok(Method::EmpDist),
            _ => Err(Error::InvalidInput(format!(
                "unknown method `{s}` (expected radius, radius-comms, pa, expdist or empdist)"
            ))),
        }
    }
}

/// Which non-edges serve as negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Negatives {
    /// Every non-edge of the full graph.
    All,
    /// `ratio` × (number of positives) non-edges drawn per fold.
    Sampled { ratio: f64 },
}

/// Scoring rule for model methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scoring {
    #[default]
    Predictive,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub quantile_bins: usize,
    pub negatives: Negatives,
    pub scoring: Scoring,
    pub plan: FitPlan,
    pub degree_term: DegreeTerm,
    /// Priors for every fold; data-scaled defaults per training graph when absent.
    pub priors: Option<PriorConfig>,
    pub k_comm: Option<usize>,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            folds: 10,
            seed: 0,
            quantile_bins: 5,
            negatives: Negatives::All,
            scoring: Scoring::Predictive,
            plan: FitPlan::default(),
            degree_term: DegreeTerm::Enabled,
            priors: None,
            k_comm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub positives: usize,
    pub negatives: usize,
    pub auc: f64,
    /// Empty when the fold has fewer positives than bins.
    pub distance_bins: Vec<QuantileBin>,
    pub degree_bins: Vec<QuantileBin>,
}

/// Mean per-bin AUC over the folds where the bin is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub bin: usize,
    pub mean_auc: Option<f64>,
    pub folds_defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub method: Method,
    pub seed: u64,
    pub split_seed: u64,
    pub negatives: Negatives,
    pub scoring: Scoring,
    pub quantile_bins: usize,
    pub folds: Vec<FoldReport>,
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub distance_quantiles: Vec<QuantileSummary>,
    pub degree_quantiles: Vec<QuantileSummary>,
}

fn summarize_bins(folds: &[FoldReport], bins: usize, pick: fn(&FoldReport) -> &[QuantileBin]) -> Vec<QuantileSummary> {
    (0..bins)
        .map(|b| {
            let vals: Vec<f64> = folds
                .iter()
                .filter_map(|f| pick(f).get(b).and_then(|q| q.auc))
                .collect();
            QuantileSummary {
                bin: b,
                mean_auc: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                folds_defined: vals.len(),
            }
        })
        .collect()
}

/// Scores `pairs` with `method` fitted on `train`.
pub fn score_pairs(
    method: Method,
    train: &SpatialGraph,
    d: &DistanceMatrix,
    pairs: &[(usize, usize)],
    cfg: &CrossvalConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if let Some(kind) = method.baseline_kind() {
        let model = fit_baseline(kind, train, d)?;
        return Ok(pairs.iter().map(|&(i, j)| model.score(i, j, d.get(i, j))).collect());
    }
    let kind = method.model_kind().expect("model method");
    let ctx = ModelContext::from_parts(train, d, cfg.degree_term);
    let mut priors = match &cfg.priors {
        Some(p) => p.clone(),
        None => PriorConfig::default_for(train, d),
    };
    if let Some(k) = cfg.k_comm {
        priors = priors.with_k_comm(k);
    }
    let trace = fit_with_plan(&ctx, &priors, kind, &cfg.plan, seed)?;
    match cfg.scoring {
        Scoring::Predictive => predictive_scores(&trace, &ctx, pairs),
        Scoring::Map => map_scores(&trace, &ctx, pairs),
    }
}

/// k-fold cross-validation of one method. Returns the report and the scored
/// pairs of every fold.
pub fn crossval_with_scores(
    g: &SpatialGraph,
    method: Method,
    cfg: &CrossvalConfig,
) -> Result<(CVReport, Vec<LinkScoreSet>)> {
    let split_seed = derive_seed(cfg.seed, 0);
    let folds = kfold_split(g, cfg.folds, split_seed)?;
    let d = pairwise_distances(g);
    let n = g.node_count();
    let mut non_edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !g.has_edge(i, j) {
                non_edges.push((i, j));
            }
        }
    }
    if non_edges.is_empty() {
        return Err(Error::InvalidGraph("complete graph has no negative pairs".into()));
    }
    let results: Vec<(FoldReport, LinkScoreSet)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let seed = derive_seed(cfg.seed, 1 + f as u64);
            let negatives: Vec<(usize, usize)> = match cfg.negatives {
                Negatives::All => non_edges.clone(),
                Negatives::Sampled { ratio } => {
                    let want = ((ratio * fold.test_edges.len() as f64).round() as usize)
                        .clamp(1, non_edges.len());
                    let mut rng = stream(derive_seed(seed, 1));
                    let mut picked: Vec<usize> =
                        index::sample(&mut rng, non_edges.len(), want).into_vec();
                    picked.sort_unstable();
                    picked.into_iter().map(|k| non_edges[k]).collect()
                }
            };
            let mut pairs = fold.test_edges.clone();
            pairs.extend_from_slice(&negatives);
            let scores = score_pairs(method, &fold.train, &d, &pairs, cfg, seed)?;
            let k = fold.train.degrees();
            let set = LinkScoreSet::new(
                pairs
                    .iter()
                    .zip(&scores)
                    .enumerate()
                    .map(|(idx, (&(i, j), &score))| ScoredPair {
                        i,
                        j,
                        score,
                        truth: idx < fold.test_edges.len(),
                        distance: d.get(i, j),
                        deg_product: (k[i] * k[j]) as f64,
                    })
                    .collect(),
            )?;
            let bins = |axis| {
                if set.positives() >= cfg.quantile_bins {
                    quantile_auc(&set, axis, cfg.quantile_bins)
                } else {
                    Ok(Vec::new())
                }
            };
            let report = FoldReport {
                fold: f,
                seed,
                positives: set.positives(),
                negatives: set.negatives(),
                auc: roc_auc(&set)?,
                distance_bins: bins(QuantileAxis::Distance)?,
                degree_bins: bins(QuantileAxis::DegreeProduct)?,
            };
            Ok((report, set))
        })
        .collect::<Result<_>>()?;
    let (fold_reports, sets): (Vec<FoldReport>, Vec<LinkScoreSet>) = results.into_iter().unzip();
    let aucs: Vec<f64> = fold_reports.iter().map(|f| f.auc).collect();
    let mean_auc = aucs.iter().sum::<f64>() / aucs.len() as f64;
    let sd_auc = if aucs.len() > 1 {
        (aucs.iter().map(|a| (a - mean_auc).powi(2)).sum::<f64>() / (aucs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let report = CVReport {
        method,
        seed: cfg.seed,
        split_seed,
        negatives: cfg.negatives,
        scoring: cfg.scoring,
        quantile_bins: cfg.quantile_bins,
        distance_quantiles: summarize_bins(&fold_reports, cfg.quantile_bins, |f| &f.distance_bins),
        degree_quantiles: summarize_bins(&fold_reports, cfg.quantile_bins, |f| &f.degree_bins),
        folds: fold_reports,
        mean_auc,
        sd_auc,
    };
    Ok((report, sets))
}

pub fn crossval(g: &SpatialGraph, method: Method, cfg: &CrossvalConfig) -> Result<CVReport> {
    Ok(crossval_with_scores(g, method, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamState;
    use rand::Rng;

    fn ring(n: usize) -> SpatialGraph {
        let ids = (0..n).map(|i| i.to_string()).collect();
        let coords = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * std::f64::consts::TAU;
                [t.cos(), t.sin()]
            })
            .collect();
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        edges.extend((0..n).map(|i| (i, (i + 2) % n)));
        SpatialGraph::new(ids, coords, edges).unwrap()
    }

    fn brute_auc(scores: &[f64], truth: &[bool]) -> f64 {
        let (mut wins, mut total) = (0.0, 0.0);
        for (a, &ta) in truth.iter().enumerate() {
            for (b, &tb) in truth.iter().enumerate() {
                if ta && !tb {
                    total += 1.0;
                    if scores[a] > scores[b] {
                        wins += 1.0;
                    } else if scores[a] == scores[b] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / total
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn auc_matches_brute_force() {
        let mut rng = stream(11);
        for _ in 0..50 {
            let scores: Vec<f64> = (0..50).map(|_| (rng.random::<f64>() * 8.0).floor() / 8.0).collect();
            let mut truth: Vec<bool> = (0..50).map(|_| rng.random::<bool>()).collect();
            truth[0] = true;
            truth[1] = false;
            let a = auc(&scores, &truth).unwrap();
            assert!((a - brute_auc(&scores, &truth)).abs() < 1e-12);
        }
    }

    #[test]
    fn kfold_partitions_edges() {
        let g = ring(50);
        assert_eq!(g.edge_count(), 100);
        let folds = kfold_split(&g, 10, 3).unwrap();
        let mut all: Vec<(usize, usize)> = Vec::new();
        for f in &folds {
            assert_eq!(f.test_edges.len(), 10);
            assert_eq!(f.train.edge_count(), 90);
            assert_eq!(f.train.node_count(), 50);
            all.extend(&f.test_edges);
        }
        all.sort_unstable();
        assert_eq!(all, g.edges());
        let again = kfold_split(&g, 10, 3).unwrap();
        for (a, b) in folds.iter().zip(&again) {
            assert_eq!(a.test_edges, b.test_edges);
        }
        assert!(kfold_split(&g, 1, 0).is_err());
        assert!(kfold_split(&g, 101, 0).is_err());
    }

    fn trace_of(states: Vec<ParamState>, lps: Vec<f64>) -> PosteriorTrace {
        let map_index = (0..lps.len()).max_by(|&a, &b| lps[a].total_cmp(&lps[b])).unwrap_or(0);
        PosteriorTrace {
            kind: ModelKind::Radius,
            iters: (0..states.len()).collect(),
            samples: states,
            log_posts: lps,
            accept_rates: None,
            map_index,
            sweep_log_posts: vec![],
            final_scales: None,
        }
    }

    #[test]
    fn predictive_is_sample_mean() {
        // Two nodes at distance 1, degree term off; radii set so σ(η) hits 0.2 and 0.6.
        let g = SpatialGraph::new(
            vec!["a".into(), "b".into()],
            vec![[0.0, 0.0], [1.0, 0.0]],
            [(0, 1)],
        )
        .unwrap();
        let ctx = ModelContext::with_degree_term(&g, DegreeTerm::Disabled);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let st = |p: f64| ParamState::radius(1.0, 1.0, vec![(1.0 + logit(p)) / 2.0; 2]);
        let t = trace_of(vec![st(0.2), st(0.6)], vec![-1.0, -2.0]);
        let p = predictive_link_probability(&t, &ctx, 0, 1).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        assert!((map_link_probability(&t, &ctx, 0, 1).unwrap() - 0.2).abs() < 1e-12);
        let one = trace_of(vec![st(0.6)], vec![0.0]);
        assert_eq!(
            predictive_link_probability(&one, &ctx, 0, 1).unwrap(),
            map_link_probability(&one, &ctx, 0, 1).unwrap()
        );
        let empty = trace_of(vec![], vec![]);
        assert!(predictive_link_probability(&empty, &ctx, 0, 1).is_err());
        assert!(map_link_probability(&empty, &ctx, 0, 1).is_err());
        assert!(predictive_link_probability(&t, &ctx, 1, 1).is_err());
    }

    fn scored(values: &[(f64, bool, f64)]) -> LinkScoreSet {
        LinkScoreSet::new(
            values
                .iter()
                .enumerate()
                .map(|(k, &(v, truth, score))| ScoredPair {
                    i: k,
                    j: k + 1000,
                    score,
                    truth,
                    distance: v,
                    deg_product: v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quantile_bins_split_positives_evenly() {
        let mut rng = stream(4);
        let mut v = Vec::new();
        for k in 0..10 {
            v.push((k as f64, true, rng.random::<f64>()));
        }
        for _ in 0..40 {
            v.push((rng.random::<f64>() * 12.0 - 1.0, false, rng.random::<f64>()));
        }
        let set = scored(&v);
        let bins = quantile_auc(&set, QuantileAxis::Distance, 5).unwrap();
        assert_eq!(bins.len(), 5);
        assert!(bins.iter().all(|b| b.positives == 2));
        assert_eq!(bins.iter().map(|b| b.positives + b.negatives).sum::<usize>(), 50);
        for w in bins.windows(2) {
            assert!(w[0].upper.unwrap() <= w[1].lower.unwrap());
        }
        assert!(quantile_auc(&set, QuantileAxis::Distance, 11).is_err());
    }

    #[test]
    fn quantile_auc_equals_overall_when_scores_ignore_bins() {
        // Same score pattern repeated in each bin.
        let pattern = [(true, 0.9), (true, 0.4), (false, 0.5), (false, 0.1), (false, 0.9)];
        let mut v = Vec::new();
        for b in 0..5 {
            for (k, &(t, s)) in pattern.iter().enumerate() {
                v.push((b as f64 * 10.0 + k as f64 * 0.1, t, s));
            }
        }
        let set = scored(&v);
        let overall = roc_auc(&set).unwrap();
        for b in quantile_auc(&set, QuantileAxis::DegreeProduct, 5).unwrap() {
            assert!((b.auc.unwrap() - overall).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_without_negatives_is_absent() {
        let set = scored(&[(0.0, true, 0.5), (1.0, true, 0.5), (1.5, false, 0.1)]);
        let bins = quantile_auc(&set, QuantileAxis::Distance, 2).unwrap();
        assert_eq!(bins[0].auc, None);
        assert_eq!(bins[1].auc, Some(1.0));
    }

    #[test]
    fn score_set_rejects_bad_pairs() {
        let p = |i, j, s| ScoredPair {
            i,
            j,
            score: s,
            truth: true,
            distance: 1.0,
            deg_product: 1.0,
        };
        assert!(LinkScoreSet::new(vec![p(1, 1, 0.5)]).is_err());
        assert!(LinkScoreSet::new(vec![p(0, 1, 1.5)]).is_err());
        assert!(LinkScoreSet::new(vec![p(0, 1, 0.5), p(1, 0, 0.5)]).is_err());
    }

    #[test]
    fn baseline_crossval_is_deterministic_and_uses_train_degrees() {
        let g = ring(30);
        let cfg = CrossvalConfig {
            seed: 9,
            ..CrossvalConfig::default()
        };
        let (a, sets) = crossval_with_scores(&g, Method::PA, &cfg).unwrap();
        let b = crossval(&g, Method::PA, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds.len(), 10);
        assert_eq!(a.distance_quantiles.len(), 5);
        let folds = kfold_split(&g, 10, a.split_seed).unwrap();
        for (fold, set) in folds.iter().zip(&sets) {
            let k = fold.train.degrees();
            for p in &set.pairs {
                assert_eq!(p.deg_product, (k[p.i] * k[p.j]) as f64);
            }
            assert_eq!(set.positives(), fold.test_edges.len());
            assert_eq!(set.negatives(), g.pair_count() - g.edge_count());
        }
        let json = serde_json::to_string(&a).unwrap();
        let back: CVReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn sampled_negatives_respect_ratio() {
        let g = ring(30);
        let cfg = CrossvalConfig {
            negatives: Negatives::Sampled { ratio: 3.0 },
            ..CrossvalConfig::default()
        };
        let r = crossval(&g, Method::ExpDist, &cfg).unwrap();
        for f in &r.folds {
            assert_eq!(f.negatives, 3 * f.positives);
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("radius-comms".parse::<Method>().unwrap(), Method::RadiusComms);
        assert_eq!("Radius+Comms".parse::<Method>().unwrap(), Method::RadiusComms);
        assert_eq!("PA".parse::<Method>().unwrap(), Method::PA);
        assert!("nope".parse::<Method>().is_err());
    }
}
