//! Communities: posterior label extraction, generalized modularity with
//! pluggable null models, Louvain optimization and NMI comparison.
//!
//! Modularity is Newman's form over all ordered pairs including i = j:
//!
//! ```text
//! Q = (1/2m) Σ_ij (A_ij − P_ij) δ(c_i, c_j)
//! ```
//!
//! so the all-in-one partition under the preferential-attachment null scores
//! exactly zero.

use std::collections::HashMap;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pairwise_distances, SpatialGraph};
use crate::model::{beta_term, sigmoid, DegreeTerm, ModelContext, ModelKind};
use crate::predict::{fit_baseline, BaselineKind};
use crate::rng::stream;
use crate::sampler::PosteriorTrace;

/// Node labels with the method that produced them. Label 0 marks the
/// don't-care group for Radius+Comms partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub origin: String,
}

impl Partition {
    pub fn new(labels: Vec<usize>, origin: impl Into<String>) -> Self {
        Partition {
            labels,
            origin: origin.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct labels.
    pub fn community_count(&self) -> usize {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }

    /// CSV with header `id,label`.
    pub fn write_csv<W: Write>(&self, g: &SpatialGraph, w: W) -> Result<()> {
        if self.labels.len() != g.node_count() {
            return Err(Error::InvalidInput("partition size differs from node count".into()));
        }
        let mut out = csv::Writer::from_writer(w);
        let wrap = |e: csv::Error| Error::InvalidInput(format!("writing partition: {e}"));
        out.write_record(["id", "label"]).map_err(wrap)?;
        for (id, l) in g.node_ids().iter().zip(&self.labels) {
            out.write_record([id.as_str(), &l.to_string()]).map_err(wrap)?;
        }
        out.flush()
            .map_err(|e| Error::InvalidInput(format!("writing partition: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NullKind {
    PA,
    ExpDist,
    EmpDist,
    RadiusFit,
}

impl std::fmt::Display for NullKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NullKind::PA => "PA",
            NullKind::ExpDist => "ExpDist",
            NullKind::EmpDist => "EmpDist",
            NullKind::RadiusFit => "RadiusFit",
        })
    }
}

/// Expected link value for every ordered pair, diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub kind: NullKind,
    n: usize,
    p: Vec<f64>,
    /// Degrees when P = k_i k_j / 2m holds unclamped everywhere.
    pa_degrees: Option<Vec<f64>>,
}

impl NullModel {
    /// Wraps a dense symmetric matrix, clamping entries to [0, 1].
    pub fn from_matrix(kind: NullKind, n: usize, mut p: Vec<f64>) -> Result<Self> {
        if p.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "null matrix has {} entries, expected {}",
                p.len(),
                n * n
            )));
        }
        for v in p.iter_mut() {
            if v.is_nan() {
                return Err(Error::InvalidInput("NaN in null matrix".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if p[i * n + j] != p[j * n + i] {
                    return Err(Error::InvalidInput(format!("null matrix asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(NullModel {
            kind,
            n,
            p,
            pa_degrees: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    /// Sum of P over all ordered pairs, diagonal included.
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Rescaled so that Σ_ij P_ij = 2m, then clamped.
    pub fn renormalized(&self, g: &SpatialGraph) -> Result<Self> {
        let t = self.total();
        if !(t > 0.0) {
            return Err(Error::InvalidInput("null matrix sums to zero".into()));
        }
        let s = g.total_degree() as f64 / t;
        NullModel::from_matrix(self.kind, self.n, self.p.iter().map(|v| v * s).collect())
    }
}

/// Builds the null matrix of `kind` on `g`. RadiusFit needs a Radius trace
/// and the context it was fitted on.
pub fn build_null(
    kind: NullKind,
    g: &SpatialGraph,
    fit: Option<(&PosteriorTrace, &ModelContext)>,
) -> Result<NullModel> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Err(Error::InvalidGraph("null model needs at least one edge".into()));
    }
    let mut p = vec![0.0; n * n];
    match kind {
        NullKind::PA => {
            let two_m = g.total_degree() as f64;
            let k: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
            for i in 0..n {
                for j in 0..n {
                    p[i * n + j] = k[i] * k[j] / two_m;
                }
            }
            let exact = p.iter().all(|&v| v <= 1.0);
            let mut null = NullModel::from_matrix(kind, n, p)?;
            if exact {
                null.pa_degrees = Some(k);
            }
            return Ok(null);
        }
        NullKind::ExpDist | NullKind::EmpDist => {
            let bk = if kind == NullKind::ExpDist {
                BaselineKind::ExpDist
            } else {
                BaselineKind::EmpDist
            };
            let d = pairwise_distances(g);
            let model = fit_baseline(bk, g, &d)?;
            for i in 0..n {
                for j in 0..n {
                    let dist = if i == j { 0.0 } else { d.get(i, j) };
                    p[i * n + j] = model.score(i, j, dist);
                }
            }
        }
        NullKind::RadiusFit => {
            let (trace, ctx) = fit.ok_or_else(|| {
                Error::InvalidInput("RadiusFit null model needs a fitted Radius trace".into())
            })?;
            if trace.kind != ModelKind::Radius {
                return Err(Error::InvalidInput("RadiusFit null model needs a Radius trace".into()));
            }
            if trace.is_empty() {
                return Err(Error::InvalidInput("empty posterior trace".into()));
            }
            if ctx.node_count() != n {
                return Err(Error::InvalidInput("trace context does not match the graph".into()));
            }
            let k = g.degrees();
            let total = g.total_degree() as f64;
            let inv = 1.0 / trace.len() as f64;
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for st in &trace.samples {
                        let eta = if i == j {
                            // Zero distance; the degree term uses k_i².
                            let pa = match ctx.degree_term() {
                                DegreeTerm::Enabled => ((k[i] * k[i]) as f64 / total - ctx.m()) / st.gamma,
                                DegreeTerm::Disabled => 0.0,
                            };
                            let beta = st.phi.map_or(0.0, |phi| beta_term(st.label(i), st.label(i), phi));
                            2.0 * st.radii[i] / st.alpha + pa + beta
                        } else {
                            ctx.logit_raw(st, i, j)
                        };
                        s += sigmoid(eta);
                    }
                    p[i * n + j] = s * inv;
                    p[j * n + i] = s * inv;
                }
            }
        }
    }
    NullModel::from_matrix(kind, n, p)
}

/// Generalized modularity of `partition` against `null`.
pub fn modularity(g: &SpatialGraph, partition: &Partition, null: &NullModel) -> Result<f64> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Err(Error::InvalidGraph("modularity is undefined without edges".into()));
    }
    if partition.labels.len() != n || null.n != n {
        return Err(Error::InvalidInput("partition, null model and graph differ in size".into()));
    }
    let c = &partition.labels;
    let two_m = g.total_degree() as f64;
    let mut internal = 0.0;
    for &(i, j) in g.edges() {
        if c[i] == c[j] {
            internal += 2.0;
        }
    }
    let expected = if let Some(k) = &null.pa_degrees {
        // Σ_c K_c² / 2m with K_c the community degree sum.
        let mut sums: HashMap<usize, f64> = HashMap::new();
        for i in 0..n {
            *sums.entry(c[i]).or_insert(0.0) += k[i];
        }
        let mut keys: Vec<usize> = sums.keys().copied().collect();
        keys.sort_unstable();
        keys.iter().map(|l| sums[l] * sums[l]).sum::<f64>() / two_m
    } else {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if c[i] == c[j] {
                    s += null.get(i, j);
                }
            }
        }
        s
    };
    Ok((internal - expected) / two_m)
}

/// Greedy local moves on the aggregated modularity matrix `b` (size × size).
/// Returns the community of every super-node, numbered 0.. in order of
/// first appearance.
fn local_moves(b: &[f64], size: usize, rng: &mut crate::rng::StreamRng) -> Vec<usize> {
    let mut comm: Vec<usize> = (0..size).collect();
    let mut count = vec![1usize; size];
    let mut s = vec![0.0; size];
    let mut order: Vec<usize> = (0..size).collect();
    for _ in 0..10_000 {
        order.shuffle(rng);
        let mut moved = false;
        for &u in &order {
            s.iter_mut().for_each(|x| *x = 0.0);
            for v in 0..size {
                if v != u {
                    s[comm[v]] += b[u * size + v];
                }
            }
            let own = comm[u];
            let (mut best, mut best_gain) = (own, 0.0);
            for c in 0..size {
                if c == own || count[c] == 0 {
                    continue;
                }
                let gain = s[c] - s[own];
                if gain > best_gain + 1e-12 {
                    best = c;
                    best_gain = gain;
                }
            }
            if best != own {
                count[own] -= 1;
                count[best] += 1;
                comm[u] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    renumber(&comm)
}

fn renumber(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Louvain optimization of the generalized modularity. Local moves visit
/// nodes in a seeded random order; levels aggregate until a level makes no
/// move. Labels are 1..=C.
pub fn louvain_optimize(g: &SpatialGraph, null: &NullModel, seed: u64) -> Result<Partition> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Err(Error::InvalidGraph("modularity is undefined without edges".into()));
    }
    if null.n != n {
        return Err(Error::InvalidInput("null model and graph differ in size".into()));
    }
    let mut b: Vec<f64> = null.p.iter().map(|p| -p).collect();
    for &(i, j) in g.edges() {
        b[i * n + j] += 1.0;
        b[j * n + i] += 1.0;
    }
    let mut rng = stream(seed);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut size = n;
    loop {
        let comm = local_moves(&b, size, &mut rng);
        let c = comm.iter().max().map_or(0, |m| m + 1);
        if c == size {
            break;
        }
        for m in membership.iter_mut() {
            *m = comm[*m];
        }
        let mut nb = vec![0.0; c * c];
        for u in 0..size {
            for v in 0..size {
                nb[comm[u] * c + comm[v]] += b[u * size + v];
            }
        }
        b = nb;
        size = c;
    }
    let labels = renumber(&membership).into_iter().map(|l| l + 1).collect();
    Ok(Partition::new(labels, format!("Louvain({})", null.kind)))
}

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information I / √(H₁ H₂), optionally over a node
/// subset. Two single-cluster partitions score 1; a single-cluster
/// partition against anything else scores 0.
pub fn nmi(p1: &Partition, p2: &Partition, restrict_to: Option<&[usize]>) -> Result<f64> {
    if p1.labels.len() != p2.labels.len() {
        return Err(Error::InvalidInput("partitions cover different node sets".into()));
    }
    let nodes: Vec<usize> = match restrict_to {
        Some(r) => {
            if r.is_empty() {
                return Err(Error::InvalidInput("empty restriction set".into()));
            }
            if let Some(&bad) = r.iter().find(|&&i| i >= p1.labels.len()) {
                return Err(Error::InvalidInput(format!("restriction node {bad} out of range")));
            }
            r.to_vec()
        }
        None => (0..p1.labels.len()).collect(),
    };
    if nodes.is_empty() {
        return Err(Error::InvalidInput("NMI of empty partitions".into()));
    }
    let total = nodes.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut a: HashMap<usize, usize> = HashMap::new();
    let mut b: HashMap<usize, usize> = HashMap::new();
    for &i in &nodes {
        let (x, y) = (p1.labels[i], p2.labels[i]);
        *joint.entry((x, y)).or_insert(0) += 1;
        *a.entry(x).or_insert(0) += 1;
        *b.entry(y).or_insert(0) += 1;
    }
    let ha = entropy(a.values().copied(), total);
    let hb = entropy(b.values().copied(), total);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut cells: Vec<(&(usize, usize), &usize)> = joint.iter().collect();
    cells.sort_unstable();
    let mut mi = 0.0;
    for (&(x, y), &c) in cells {
        let pxy = c as f64 / total;
        let px = a[&x] as f64 / total;
        let py = b[&y] as f64 / total;
        mi += pxy * (pxy / (px * py)).ln();
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Maps `labels` onto `anchor` by greedy maximum overlap. Label 0 stays 0;
/// unmatched labels get fresh values above every anchor label.
fn align_to(labels: &[usize], anchor: &[usize]) -> Vec<usize> {
    let mut overlap: HashMap<(usize, usize), usize> = HashMap::new();
    for (&l, &a) in labels.iter().zip(anchor) {
        if l != 0 && a != 0 {
            *overlap.entry((l, a)).or_insert(0) += 1;
        }
    }
    let mut cells: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    cells.sort_unstable_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut map: HashMap<usize, usize> = HashMap::from([(0, 0)]);
    let mut used: std::collections::HashSet<usize> = std::collections::HashSet::new();
    for ((l, a), _) in cells {
        if !map.contains_key(&l) && !used.contains(&a) {
            map.insert(l, a);
            used.insert(a);
        }
    }
    let mut fresh = anchor.iter().copied().max().unwrap_or(0).max(*labels.iter().max().unwrap_or(&0)) + 1;
    let mut rest: Vec<usize> = labels.iter().copied().filter(|l| !map.contains_key(l)).collect();
    rest.sort_unstable();
    rest.dedup();
    for l in rest {
        map.insert(l, fresh);
        fresh += 1;
    }
    labels.iter().map(|l| map[l]).collect()
}

/// Modal label per node after aligning every sample to the MAP sample.
/// Ties go to the smallest label.
pub fn extract_communities(trace: &PosteriorTrace) -> Result<Partition> {
    let anchor = trace
        .map_state()?
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trace has no community labels".into()))?;
    let n = anchor.len();
    let mut votes: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n];
    for s in &trace.samples {
        let labels = s
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("trace sample has no community labels".into()))?;
        for (i, l) in align_to(labels, anchor).into_iter().enumerate() {
            *votes[i].entry(l).or_insert(0) += 1;
        }
    }
    let labels = votes
        .iter()
        .map(|v| {
            v.iter()
                .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
                .map_or(0, |(&l, _)| l)
        })
        .collect();
    Ok(Partition::new(labels, "RadiusComms"))
}

/// A community-detection method for [`comparison_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommunityMethod {
    /// Louvain under a null model.
    Louvain(NullKind),
    /// Posterior modal labels of a Radius+Comms fit.
    RadiusComms,
}

impl std::fmt::Display for CommunityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommunityMethod::Louvain(k) => write!(f, "{k}"),
            CommunityMethod::RadiusComms => f.write_str("RadiusComms"),
        }
    }
}

impl FromStr for CommunityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "pa" => Ok(CommunityMethod::Louvain(NullKind::PA)),
            "expdist" => Ok(CommunityMethod::Louvain(NullKind::ExpDist)),
            "empdist" => Ok(CommunityMethod::Louvain(NullKind::EmpDist)),
            "radiusfit" | "radius" => Ok(CommunityMethod::Louvain(NullKind::RadiusFit)),
            "radiuscomms" => Ok(CommunityMethod::RadiusComms),
            _ => Err(Error::InvalidInput(format!(
                "unknown community method `{s}` (expected pa, expdist, empdist, radius-fit or radius-comms)"
            ))),
        }
    }
}

/// Fitted posteriors some methods need.
#[derive(Debug, Clone, Copy, Default)]
pub struct CommunityInputs<'a> {
    pub radius: Option<(&'a PosteriorTrace, &'a ModelContext)>,
    pub radius_comms: Option<&'a PosteriorTrace>,
}

pub fn run_method(
    g: &SpatialGraph,
    method: CommunityMethod,
    inputs: &CommunityInputs,
    seed: u64,
) -> Result<Partition> {
    match method {
        CommunityMethod::Louvain(kind) => {
            let null = build_null(kind, g, inputs.radius)?;
            let mut p = louvain_optimize(g, &null, seed)?;
            p.origin = method.to_string();
            Ok(p)
        }
        CommunityMethod::RadiusComms => {
            let t = inputs.radius_comms.ok_or_else(|| {
                Error::InvalidInput("RadiusComms communities need a Radius+Comms trace".into())
            })?;
            extract_communities(t)
        }
    }
}

/// Pairwise NMI between methods, over all nodes and over the nodes a
/// Radius+Comms partition placed in a community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub methods: Vec<String>,
    pub normalization: String,
    pub full: Vec<Vec<f64>>,
    /// Present when a RadiusComms partition with a non-empty community set exists.
    pub restricted: Option<Vec<Vec<f64>>>,
    pub restricted_size: Option<usize>,
    pub partitions: Vec<Partition>,
}

/// NMI matrices for precomputed partitions. The restriction set is the nodes
/// with a nonzero label in the first RadiusComms partition.
pub fn compare_partitions(partitions: Vec<Partition>) -> Result<ComparisonMatrix> {
    let k = partitions.len();
    let restrict: Option<Vec<usize>> = partitions
        .iter()
        .find(|p| p.origin == "RadiusComms")
        .map(|p| (0..p.labels.len()).filter(|&i| p.labels[i] != 0).collect::<Vec<_>>())
        .filter(|r| !r.is_empty());
    let mut full = vec![vec![0.0; k]; k];
    let mut restricted = restrict.as_ref().map(|_| vec![vec![0.0; k]; k]);
    for a in 0..k {
        for b in a..k {
            let v = nmi(&partitions[a], &partitions[b], None)?;
            full[a][b] = v;
            full[b][a] = v;
            if let (Some(r), Some(m)) = (restrict.as_ref(), restricted.as_mut()) {
                let v = nmi(&partitions[a], &partitions[b], Some(r))?;
                m[a][b] = v;
                m[b][a] = v;
            }
        }
    }
    Ok(ComparisonMatrix {
        methods: partitions.iter().map(|p| p.origin.clone()).collect(),
        normalization: "geometric".into(),
        full,
        restricted,
        restricted_size: restrict.map(|r| r.len()),
        partitions,
    })
}

/// Runs every method and compares the results.
pub fn comparison_matrix(
    g: &SpatialGraph,
    methods: &[CommunityMethod],
    inputs: &CommunityInputs,
    seed: u64,
) -> Result<ComparisonMatrix> {
    if methods.is_empty() {
        return Err(Error::InvalidInput("no community methods given".into()));
    }
    let partitions = methods
        .iter()
        .map(|&m| run_method(g, m, inputs, seed))
        .collect::<Result<Vec<_>>>()?;
    compare_partitions(partitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamState;

    fn graph(n: usize, edges: Vec<(usize, usize)>) -> SpatialGraph {
        let ids = (0..n).map(|i| format!("v{i}")).collect();
        let coords = (0..n).map(|i| [i as f64, (i * i % 7) as f64]).collect();
        SpatialGraph::new(ids, coords, edges).unwrap()
    }

    fn two_triangles() -> SpatialGraph {
        graph(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn pa_null_on_cycle() {
        let g = graph(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]);
        let null = build_null(NullKind::PA, &g, None).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(null.get(i, j), 0.5);
            }
        }
    }

    #[test]
    fn all_in_one_is_zero_under_pa() {
        let g = graph(7, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (1, 5)]);
        let null = build_null(NullKind::PA, &g, None).unwrap();
        let q = modularity(&g, &Partition::new(vec![1; 7], "one"), &null).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn two_triangles_hand_value() {
        // Each triangle holds 3 of 6 edges and half the degree: Q = 2(1/2 − 1/4).
        let g = two_triangles();
        let null = build_null(NullKind::PA, &g, None).unwrap();
        let p = Partition::new(vec![1, 1, 1, 2, 2, 2], "t");
        assert!((modularity(&g, &p, &null).unwrap() - 0.5).abs() < 1e-15);
        // Singletons: −Σ k_i² / (2m)² = −6·4/144.
        let s = Partition::new((0..6).collect(), "s");
        assert!((modularity(&g, &s, &null).unwrap() + 24.0 / 144.0).abs() < 1e-15);
    }

    #[test]
    fn dense_and_closed_form_agree() {
        let g = two_triangles();
        let pa = build_null(NullKind::PA, &g, None).unwrap();
        let dense = NullModel::from_matrix(NullKind::PA, 6, pa.p.clone()).unwrap();
        for labels in [vec![1, 1, 2, 2, 3, 3], vec![0, 1, 0, 1, 0, 1]] {
            let p = Partition::new(labels, "x");
            let a = modularity(&g, &p, &pa).unwrap();
            let b = modularity(&g, &p, &dense).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn louvain_recovers_triangles() {
        let g = two_triangles();
        let null = build_null(NullKind::PA, &g, None).unwrap();
        let p = louvain_optimize(&g, &null, 5).unwrap();
        assert_eq!(p.labels, vec![1, 1, 1, 2, 2, 2]);
        assert_eq!(louvain_optimize(&g, &null, 5).unwrap(), p);
    }

    #[test]
    fn nmi_hand_value() {
        // Contingency [[2,1],[0,3]] over 6 nodes.
        let a = Partition::new(vec![1, 1, 1, 2, 2, 2], "a");
        let b = Partition::new(vec![5, 5, 7, 7, 7, 7], "b");
        let ln = f64::ln;
        let h_a = ln(2.0);
        let h_b = -(1.0 / 3.0) * ln(1.0 / 3.0) - (2.0 / 3.0) * ln(2.0 / 3.0);
        let i = (2.0 / 6.0) * ln((2.0 / 6.0) / (0.5 * (1.0 / 3.0)))
            + (1.0 / 6.0) * ln((1.0 / 6.0) / (0.5 * (2.0 / 3.0)))
            + (3.0 / 6.0) * ln((3.0 / 6.0) / (0.5 * (2.0 / 3.0)));
        let expect = i / (h_a * h_b).sqrt();
        assert!((nmi(&a, &b, None).unwrap() - expect).abs() < 1e-9);
        assert!((nmi(&a, &a, None).unwrap() - 1.0).abs() < 1e-12);
        let single = Partition::new(vec![0; 6], "one");
        let singletons = Partition::new((0..6).collect(), "s");
        assert_eq!(nmi(&single, &singletons, None).unwrap(), 0.0);
        assert!(nmi(&a, &b, Some(&[])).is_err());
        assert!((nmi(&a, &b, Some(&[0, 1, 3, 4])).unwrap() - 1.0).abs() < 1e-12);
    }

    fn comms_trace(samples: Vec<Vec<usize>>, map_index: usize) -> PosteriorTrace {
        let n = samples[0].len();
        PosteriorTrace {
            kind: ModelKind::RadiusComms,
            iters: (0..samples.len()).collect(),
            log_posts: (0..samples.len()).map(|k| if k == map_index { 0.0 } else { -1.0 }).collect(),
            samples: samples
                .into_iter()
                .map(|l| ParamState::radius_comms(1.0, 1.0, 1.0, vec![1.0; n], l))
                .collect(),
            accept_rates: None,
            map_index,
            sweep_log_posts: vec![],
            final_scales: None,
        }
    }

    #[test]
    fn extraction_aligns_switched_labels() {
        let t = comms_trace(
            vec![
                vec![1, 1, 2, 2, 0],
                vec![2, 2, 1, 1, 0],
                vec![2, 2, 1, 1, 0],
                vec![1, 1, 2, 2, 2],
            ],
            0,
        );
        let p = extract_communities(&t).unwrap();
        assert_eq!(p.labels, vec![1, 1, 2, 2, 0]);
    }

    #[test]
    fn extraction_mode_and_agreement() {
        let t = comms_trace(vec![vec![0], vec![0], vec![0], vec![2]], 0);
        assert_eq!(extract_communities(&t).unwrap().labels, vec![0]);
        let same = comms_trace(vec![vec![3, 1, 0]; 3], 1);
        assert_eq!(extract_communities(&same).unwrap().labels, vec![3, 1, 0]);
        let mut radius = comms_trace(vec![vec![1]], 0);
        radius.samples[0].labels = None;
        assert!(extract_communities(&radius).is_err());
    }

    #[test]
    fn single_method_matrix() {
        let g = two_triangles();
        let m = comparison_matrix(&g, &[CommunityMethod::Louvain(NullKind::PA)], &Default::default(), 1)
            .unwrap();
        assert_eq!(m.full, vec![vec![1.0]]);
        assert_eq!(m.restricted_size, None);
        assert!(comparison_matrix(
            &g,
            &[CommunityMethod::Louvain(NullKind::RadiusFit)],
            &Default::default(),
            1
        )
        .is_err());
    }

    #[test]
    fn renormalized_null_sums_to_two_m() {
        let g = two_triangles();
        let null = build_null(NullKind::ExpDist, &g, None).unwrap();
        let r = null.renormalized(&g).unwrap();
        assert!((r.total() - 12.0).abs() < 1e-9);
    }
}
