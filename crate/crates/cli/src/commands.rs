use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use radnet_core::community::{
    build_null, compare_partitions, extract_communities, louvain_optimize, modularity, CommunityMethod, Partition,
};
use radnet_core::graph::{
    default_grid, exponential_ks_test, index_of_dispersion, linked_distances, load_graph, pairwise_distances,
    read_edges, write_edges, write_nodes, DistanceMatrix, SpatialGraph,
};
use radnet_core::model::{DegreeTerm, ModelContext, ModelKind};
use radnet_core::predict::{
    crossval_with_scores, map_scores, predictive_scores, quantile_auc, roc_auc, LinkScoreSet, Method,
    QuantileAxis, QuantileBin, QuantileSummary, ScoredPair, Scoring,
};
use radnet_core::rng::derive_seed;
use radnet_core::sampler::{fit_with_plan, read_trace_jsonl, trace_summary, write_trace_jsonl, PosteriorTrace};
use radnet_core::synth::{
    generate_batch, generate_network, prior_sensitivity_experiment, write_truth, GenSpec, Generated, Histogram,
    PriorSetting, SensitivityConfig,
};

use crate::run::{input_error, Run};
use crate::{Common, GraphArgs};

type Writer = BufWriter<File>;

/// Writes one output file through a library writer and flushes it.
fn emit(run: &mut Run, name: &str, f: impl FnOnce(&mut Writer) -> radnet_core::Result<()>) -> Result<()> {
    let mut w = run.create(name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn csv_rows(run: &mut Run, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(run.create(name)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn load(run: &mut Run, ga: &GraphArgs) -> Result<(SpatialGraph, DistanceMatrix)> {
    run.input(&ga.nodes)?;
    run.input(&ga.edges)?;
    let g = load_graph(&ga.nodes, &ga.edges)?;
    let d = pairwise_distances(&g);
    Ok((g, d))
}

fn read_trace(run: &mut Run, path: &Path, n: usize) -> Result<PosteriorTrace> {
    run.input(path)?;
    let f = File::open(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    let trace = read_trace_jsonl(BufReader::new(f), &path.display().to_string())?;
    if trace.is_empty() {
        return Err(input_error(format!("{} holds no samples", path.display())));
    }
    let m = trace.samples[0].radii.len();
    if m != n {
        return Err(input_error(format!(
            "{} has {m} radii per sample but the graph has {n} nodes",
            path.display()
        )));
    }
    Ok(trace)
}

fn read_json<T: serde::de::DeserializeOwned>(run: &mut Run, path: &Path) -> Result<T> {
    run.input(path)?;
    let text =
        fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn parse_model(s: &str) -> Result<ModelKind> {
    s.parse::<Method>()?
        .model_kind()
        .ok_or_else(|| input_error(format!("`{s}` is a baseline, not a model; use radius or radius-comms")))
}

#[derive(Serialize)]
struct ExpFit {
    rate: f64,
    ks_statistic: f64,
    ks_p_value: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    nodes: usize,
    edges: usize,
    mean_degree: f64,
    index_of_dispersion: Option<f64>,
    quadrat_grid: (usize, usize),
    exponential_fit: Option<ExpFit>,
    linked_distances: Vec<f64>,
}

pub fn analyze(ga: &GraphArgs, bins: usize, common: &Common) -> Result<()> {
    if bins == 0 {
        return Err(input_error("--bins must be at least 1"));
    }
    let mut run = Run::start("analyze", common)?;
    let (g, d) = load(&mut run, ga)?;
    let n = g.node_count();
    let grid = default_grid(n);
    let dispersion = match index_of_dispersion(&g, grid) {
        Ok(v) => Some(v),
        Err(e) => {
            run.warn(format!("index of dispersion unavailable: {e}"));
            None
        }
    };
    let exponential_fit = match exponential_ks_test(&g, &d) {
        Ok((rate, ks_statistic, ks_p_value)) => Some(ExpFit {
            rate,
            ks_statistic,
            ks_p_value,
        }),
        Err(e) => {
            run.warn(format!("exponential fit unavailable: {e}"));
            None
        }
    };
    let linked = linked_distances(&g, &d);
    let report = AnalyzeReport {
        nodes: n,
        edges: g.edge_count(),
        mean_degree: if n > 0 { g.total_degree() as f64 / n as f64 } else { 0.0 },
        index_of_dispersion: dispersion,
        quadrat_grid: grid,
        exponential_fit,
        linked_distances: linked.clone(),
    };
    run.write_json("analysis.json", &report)?;
    let ids = g.node_ids();
    let rows = g
        .edges()
        .iter()
        .zip(&linked)
        .map(|(&(a, b), dist)| vec![ids[a].clone(), ids[b].clone(), dist.to_string()])
        .collect();
    csv_rows(&mut run, "linked_distances.csv", &["src", "dst", "distance"], rows)?;
    if !linked.is_empty() {
        let h = Histogram::of(&linked, bins);
        let rows = h
            .counts
            .iter()
            .enumerate()
            .map(|(b, c)| vec![b.to_string(), h.edges[b].to_string(), h.edges[b + 1].to_string(), c.to_string()])
            .collect();
        csv_rows(&mut run, "distance_histogram.csv", &["bin", "lower", "upper", "count"], rows)?;
    }
    run.finish()
}

pub fn fit(ga: &GraphArgs, model: &str, common: &Common) -> Result<()> {
    let kind = parse_model(model)?;
    let mut run = Run::start("fit", common)?;
    let (g, d) = load(&mut run, ga)?;
    let priors = run.config.priors(&g, &d)?;
    let plan = run.config.fit_plan()?;
    let dt = run.config.degree_term()?;
    run.setting("model", kind)?;
    run.setting("priors", &priors)?;
    run.setting("plan", &plan)?;
    run.setting("degree_term", dt)?;
    let ctx = ModelContext::from_parts(&g, &d, dt);
    let trace = fit_with_plan(&ctx, &priors, kind, &plan, run.seed)?;
    let summary = trace_summary(&trace)?;
    if let Some(r) = summary.split_rhat.filter(|r| *r > 1.1) {
        run.warn(format!("split R-hat of the log posterior is {r:.3}; the chain may not have converged"));
    }
    emit(&mut run, "trace.jsonl", |w| write_trace_jsonl(&trace, w))?;
    run.write_json("summary.json", &summary)?;
    run.finish()
}

fn bin_rows(bins: &[QuantileBin]) -> Vec<Vec<String>> {
    bins.iter()
        .map(|b| {
            vec![
                b.bin.to_string(),
                opt(b.lower),
                opt(b.upper),
                b.positives.to_string(),
                b.negatives.to_string(),
                opt(b.auc),
            ]
        })
        .collect()
}

const BIN_HEADER: [&str; 6] = ["bin", "lower", "upper", "positives", "negatives", "auc"];

#[derive(Serialize)]
struct PredictReport {
    scoring: Scoring,
    scored_pairs: usize,
    positives: usize,
    negatives: usize,
    auc: Option<f64>,
    distance_bins: Vec<QuantileBin>,
    degree_bins: Vec<QuantileBin>,
}

pub fn predict(ga: &GraphArgs, trace_path: &Path, test_edges: Option<&Path>, map: bool, common: &Common) -> Result<()> {
    let mut run = Run::start("predict", common)?;
    let (g, d) = load(&mut run, ga)?;
    let n = g.node_count();
    let trace = read_trace(&mut run, trace_path, n)?;
    let cv = run.config.crossval(run.seed)?;
    let scoring = if map { Scoring::Map } else { cv.scoring };
    let ctx = ModelContext::from_parts(&g, &d, run.config.degree_term()?);
    run.setting("scoring", scoring)?;
    run.setting("degree_term", ctx.degree_term())?;

    let mut test = BTreeSet::new();
    if let Some(p) = test_edges {
        run.input(p)?;
        let f = File::open(p).map_err(|e| input_error(format!("cannot read {}: {e}", p.display())))?;
        for (a, b) in read_edges(f, &p.display().to_string(), g.node_ids())? {
            if a == b {
                return Err(input_error(format!("{}: self-loop on `{}`", p.display(), g.node_ids()[a])));
            }
            if g.has_edge(a, b) {
                return Err(input_error(format!(
                    "{}: test edge ({}, {}) is in the training graph",
                    p.display(),
                    g.node_ids()[a],
                    g.node_ids()[b]
                )));
            }
            test.insert((a.min(b), a.max(b)));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !g.has_edge(i, j))
        .collect();
    let scores = match scoring {
        Scoring::Predictive => predictive_scores(&trace, &ctx, &pairs)?,
        Scoring::Map => map_scores(&trace, &ctx, &pairs)?,
    };
    let degrees = g.degrees();
    let set = LinkScoreSet::new(
        pairs
            .iter()
            .zip(&scores)
            .map(|(&(i, j), &score)| ScoredPair {
                i,
                j,
                score,
                truth: test.contains(&(i, j)),
                distance: d.get(i, j),
                deg_product: (degrees[i] * degrees[j]) as f64,
            })
            .collect(),
    )?;
    emit(&mut run, "scores.csv", |w| set.write_csv(&g, w))?;

    let mut report = PredictReport {
        scoring,
        scored_pairs: set.pairs.len(),
        positives: set.positives(),
        negatives: set.negatives(),
        auc: None,
        distance_bins: Vec::new(),
        degree_bins: Vec::new(),
    };
    if test_edges.is_some() {
        report.auc = Some(roc_auc(&set)?);
        if set.positives() >= cv.quantile_bins {
            report.distance_bins = quantile_auc(&set, QuantileAxis::Distance, cv.quantile_bins)?;
            report.degree_bins = quantile_auc(&set, QuantileAxis::DegreeProduct, cv.quantile_bins)?;
            csv_rows(&mut run, "quantiles_distance.csv", &BIN_HEADER, bin_rows(&report.distance_bins))?;
            csv_rows(&mut run, "quantiles_degree.csv", &BIN_HEADER, bin_rows(&report.degree_bins))?;
        } else {
            run.warn(format!(
                "{} test edges is fewer than {} quantile bins; quantile tables skipped",
                set.positives(),
                cv.quantile_bins
            ));
        }
    }
    run.write_json("report.json", &report)?;
    run.finish()
}

fn summary_rows(s: &[QuantileSummary]) -> Vec<Vec<String>> {
    s.iter()
        .map(|q| vec![q.bin.to_string(), opt(q.mean_auc), q.folds_defined.to_string()])
        .collect()
}

pub fn crossval(ga: &GraphArgs, method: &str, dump_scores: bool, common: &Common) -> Result<()> {
    let method: Method = method.parse()?;
    let mut run = Run::start("crossval", common)?;
    let (g, d) = load(&mut run, ga)?;
    let mut cv = run.config.crossval(run.seed)?;
    if run.config.entries().keys().any(|k| k.starts_with("prior.")) {
        cv.priors = Some(run.config.priors(&g, &d)?);
        cv.k_comm = None;
    }
    run.setting("method", method)?;
    run.setting("crossval", &cv)?;
    run.derived_seed("split", derive_seed(run.seed, 0));
    let (report, sets) = crossval_with_scores(&g, method, &cv)?;
    for f in report.folds.iter().filter(|f| f.distance_bins.is_empty()) {
        run.warn(format!(
            "fold {} has {} test edges, fewer than {} quantile bins; its quantile tables are empty",
            f.fold, f.positives, cv.quantile_bins
        ));
    }
    run.write_json("report.json", &report)?;
    let rows = report
        .folds
        .iter()
        .map(|f| {
            vec![
                f.fold.to_string(),
                f.seed.to_string(),
                f.positives.to_string(),
                f.negatives.to_string(),
                f.auc.to_string(),
            ]
        })
        .collect();
    csv_rows(&mut run, "folds.csv", &["fold", "seed", "positives", "negatives", "auc"], rows)?;
    let header = ["bin", "mean_auc", "folds_defined"];
    csv_rows(&mut run, "quantiles_distance.csv", &header, summary_rows(&report.distance_quantiles))?;
    csv_rows(&mut run, "quantiles_degree.csv", &header, summary_rows(&report.degree_quantiles))?;
    if dump_scores {
        for (k, s) in sets.iter().enumerate() {
            emit(&mut run, &format!("scores/fold_{k:02}.csv"), |w| s.write_csv(&g, w))?;
        }
    }
    run.finish()
}

#[derive(Serialize)]
struct CommunityReport {
    methods: Vec<String>,
    normalization: String,
    community_counts: Vec<usize>,
    /// Louvain methods only: modularity under the method's own null.
    modularity: Vec<Option<f64>>,
    full: Vec<Vec<f64>>,
    restricted: Option<Vec<Vec<f64>>>,
    restricted_size: Option<usize>,
}

fn file_stem(m: CommunityMethod) -> String {
    m.to_string().to_ascii_lowercase()
}

fn matrix_rows(methods: &[String], m: &[Vec<f64>]) -> Vec<Vec<String>> {
    methods
        .iter()
        .zip(m)
        .map(|(name, row)| std::iter::once(name.clone()).chain(row.iter().map(|v| v.to_string())).collect())
        .collect()
}

pub fn communities(
    ga: &GraphArgs,
    methods: &[String],
    radius_trace: Option<&Path>,
    comms_trace: Option<&Path>,
    renormalize: bool,
    common: &Common,
) -> Result<()> {
    let mut parsed: Vec<CommunityMethod> = Vec::new();
    for s in methods {
        let m: CommunityMethod = s.trim().parse()?;
        if !parsed.contains(&m) {
            parsed.push(m);
        }
    }
    if parsed.is_empty() {
        return Err(input_error("no community methods given"));
    }
    let mut run = Run::start("communities", common)?;
    let (g, d) = load(&mut run, ga)?;
    let n = g.node_count();
    let dt = run.config.degree_term()?;
    let ctx = ModelContext::from_parts(&g, &d, dt);
    run.setting("methods", parsed.iter().map(|m| m.to_string()).collect::<Vec<_>>())?;
    run.setting("renormalize", renormalize)?;

    let obtain = |run: &mut Run, path: Option<&Path>, kind: ModelKind, index: u64, name: &str| -> Result<PosteriorTrace> {
        if let Some(p) = path {
            return read_trace(run, p, n);
        }
        let priors = run.config.priors(&g, &d)?;
        let plan = run.config.fit_plan()?;
        let seed = derive_seed(run.seed, index);
        run.derived_seed(name, seed);
        run.setting(&format!("{name}_priors"), &priors)?;
        run.setting(&format!("{name}_plan"), &plan)?;
        let t = fit_with_plan(&ctx, &priors, kind, &plan, seed)?;
        emit(run, &format!("{name}_trace.jsonl"), |w| write_trace_jsonl(&t, w))?;
        Ok(t)
    };
    let needs_radius = parsed.contains(&CommunityMethod::Louvain(radnet_core::community::NullKind::RadiusFit));
    let radius = match needs_radius {
        true => Some(obtain(&mut run, radius_trace, ModelKind::Radius, 1, "radius")?),
        false => None,
    };
    let comms = match parsed.contains(&CommunityMethod::RadiusComms) {
        true => Some(obtain(&mut run, comms_trace, ModelKind::RadiusComms, 2, "radius_comms")?),
        false => None,
    };
    let louvain_seed = derive_seed(run.seed, 3);
    run.derived_seed("louvain", louvain_seed);

    let mut partitions: Vec<Partition> = Vec::new();
    let mut q = Vec::new();
    for &m in &parsed {
        match m {
            CommunityMethod::Louvain(kind) => {
                let mut null = build_null(kind, &g, radius.as_ref().map(|t| (t, &ctx)))?;
                if renormalize {
                    null = null.renormalized(&g)?;
                }
                let mut p = louvain_optimize(&g, &null, louvain_seed)?;
                p.origin = m.to_string();
                q.push(Some(modularity(&g, &p, &null)?));
                partitions.push(p);
            }
            CommunityMethod::RadiusComms => {
                partitions.push(extract_communities(comms.as_ref().expect("fitted above"))?);
                q.push(None);
            }
        }
    }
    for (m, p) in parsed.iter().zip(&partitions) {
        emit(&mut run, &format!("partitions/{}.csv", file_stem(*m)), |w| p.write_csv(&g, w))?;
    }
    let cm = compare_partitions(partitions)?;
    let report = CommunityReport {
        methods: cm.methods.clone(),
        normalization: cm.normalization.clone(),
        community_counts: cm.partitions.iter().map(|p| p.community_count()).collect(),
        modularity: q,
        full: cm.full.clone(),
        restricted: cm.restricted.clone(),
        restricted_size: cm.restricted_size,
    };
    run.write_json("communities.json", &report)?;
    let mut header = vec!["method"];
    header.extend(cm.methods.iter().map(String::as_str));
    csv_rows(&mut run, "nmi_full.csv", &header, matrix_rows(&cm.methods, &cm.full))?;
    if let Some(r) = &cm.restricted {
        csv_rows(&mut run, "nmi_restricted.csv", &header, matrix_rows(&cm.methods, r))?;
    }
    run.finish()
}

fn write_network(run: &mut Run, prefix: &str, spec: &GenSpec, gen: &Generated) -> Result<()> {
    emit(run, &format!("{prefix}nodes.csv"), |w| write_nodes(gen.graph(), w))?;
    emit(run, &format!("{prefix}edges.csv"), |w| write_edges(gen.graph(), w))?;
    emit(run, &format!("{prefix}truth.json"), |w| {
        write_truth(spec, gen, &mut *w)?;
        w.write_all(b"\n").map_err(|e| radnet_core::Error::InvalidInput(e.to_string()))
    })?;
    for msg in &gen.warnings {
        run.warn(format!("{prefix}{msg}"));
    }
    Ok(())
}

pub fn generate(spec_path: &Path, count: usize, common: &Common) -> Result<()> {
    if count == 0 {
        return Err(input_error("--count must be at least 1"));
    }
    let mut run = Run::start("generate", common)?;
    let mut spec: GenSpec = read_json(&mut run, spec_path)?;
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    spec.validate()?;
    run.setting("spec", &spec)?;
    run.setting("count", count)?;
    run.derived_seed("spec", spec.seed);
    if count == 1 {
        let gen = generate_network(&spec)?;
        write_network(&mut run, "", &spec, &gen)?;
    } else {
        for (k, (s, gen)) in generate_batch(&spec, count)?.iter().enumerate() {
            let prefix = format!("net_{k:03}/");
            run.derived_seed(&format!("net_{k:03}"), s.seed);
            write_network(&mut run, &prefix, s, gen)?;
        }
    }
    run.finish()
}

pub fn prior_sens(spec_path: &Path, settings_path: &Path, networks: usize, bins: usize, common: &Common) -> Result<()> {
    if networks == 0 || bins == 0 {
        return Err(input_error("--networks and --bins must be at least 1"));
    }
    let mut run = Run::start("prior-sens", common)?;
    let spec: GenSpec = read_json(&mut run, spec_path)?;
    let settings: Vec<PriorSetting> = read_json(&mut run, settings_path)?;
    let degree_term = match run.config.get("model.degree_term") {
        Some(_) => run.config.degree_term()?,
        None => DegreeTerm::Disabled,
    };
    let cfg = SensitivityConfig {
        networks,
        plan: run.config.fit_plan()?,
        degree_term,
        histogram_bins: bins,
        seed: common.seed.unwrap_or(spec.seed),
    };
    run.setting("spec", &spec)?;
    run.setting("settings", &settings)?;
    run.setting("sensitivity", &cfg)?;
    run.derived_seed("networks", cfg.seed);
    let report = prior_sensitivity_experiment(&spec, &settings, &cfg)?;
    run.write_json("report.json", &report)?;
    let mut est = Vec::new();
    let mut hist = Vec::new();
    for s in &report.settings {
        for f in &s.fits {
            for p in &f.params {
                est.push(vec![
                    s.label.clone(),
                    f.network.to_string(),
                    p.name.clone(),
                    p.truth.to_string(),
                    p.mode.to_string(),
                    p.mean.to_string(),
                    p.q025.to_string(),
                    p.q975.to_string(),
                    p.rel_error.to_string(),
                ]);
                for (b, c) in p.histogram.counts.iter().enumerate() {
                    hist.push(vec![
                        s.label.clone(),
                        f.network.to_string(),
                        p.name.clone(),
                        b.to_string(),
                        p.histogram.edges[b].to_string(),
                        p.histogram.edges[b + 1].to_string(),
                        c.to_string(),
                    ]);
                }
            }
        }
    }
    csv_rows(
        &mut run,
        "estimates.csv",
        &["setting", "network", "param", "truth", "mode", "mean", "q025", "q975", "rel_error"],
        est,
    )?;
    csv_rows(
        &mut run,
        "histograms.csv",
        &["setting", "network", "param", "bin", "lower", "upper", "count"],
        hist,
    )?;
    run.finish()
}
