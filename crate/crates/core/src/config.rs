//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Keys are dotted paths such
//! as `prior.alpha.mu` or `sampler.iters`. Unknown keys are rejected. A prior
//! block given only in part (say `prior.alpha.mu` without
//! `prior.alpha.sigma`) is an error naming the missing key; a block left out
//! entirely takes its data-scaled default.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, SpatialGraph};
use crate::model::{DegreeTerm, PriorConfig, TruncNormal};
use crate::predict::{CrossvalConfig, Negatives, Scoring};
use crate::sampler::{FitPlan, ProposalScales};

pub const KNOWN_KEYS: &[&str] = &[
    "prior.alpha.mu",
    "prior.alpha.sigma",
    "prior.gamma.mu",
    "prior.gamma.sigma",
    "prior.phi.mu",
    "prior.phi.sigma",
    "prior.r.mu",
    "prior.r.sigma",
    "prior.theta",
    "model.k_comm",
    "model.degree_term",
    "sampler.init_iters",
    "sampler.iters",
    "sampler.burn_in",
    "sampler.thin",
    "sampler.adapt",
    "sampler.adapt_window",
    "sampler.prop.alpha",
    "sampler.prop.gamma",
    "sampler.prop.phi",
    "sampler.prop.r",
    "sampler.seed",
    "cv.folds",
    "cv.quantile_bins",
    "cv.negatives",
    "cv.scoring",
];

/// Parsed assignments, in key order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: source.into(),
                line: k as u64 + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(err(format!("empty value for `{key}`")));
            }
            if cfg.entries.insert(key.into(), value.into()).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Sets or replaces a value (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.into(), value.into());
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parsed(key)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parsed(key)
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parsed(key)
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.parsed(key)
    }

    /// Both members of a two-key block, or neither.
    fn pair(&self, a: &str, b: &str) -> Result<Option<(f64, f64)>> {
        match (self.f64(a)?, self.f64(b)?) {
            (Some(x), Some(y)) => Ok(Some((x, y))),
            (None, None) => Ok(None),
            (Some(_), None) => Err(Error::MissingKey(b.into())),
            (None, Some(_)) => Err(Error::MissingKey(a.into())),
        }
    }

    fn trunc(&self, name: &str) -> Result<Option<TruncNormal>> {
        self.pair(&format!("prior.{name}.mu"), &format!("prior.{name}.sigma"))?
            .map(|(mu, sigma)| {
                TruncNormal::new(mu, sigma).map_err(|e| Error::Config(format!("prior.{name}: {e}")))
            })
            .transpose()
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        self.u64("sampler.seed")
    }

    pub fn degree_term(&self) -> Result<DegreeTerm> {
        match self.get("model.degree_term") {
            None | Some("enabled") => Ok(DegreeTerm::Enabled),
            Some("disabled") => Ok(DegreeTerm::Disabled),
            Some(v) => Err(Error::Config(format!(
                "model.degree_term must be `enabled` or `disabled`, got `{v}`"
            ))),
        }
    }

    /// Data-scaled defaults with every configured block applied.
    pub fn priors(&self, g: &SpatialGraph, d: &DistanceMatrix) -> Result<PriorConfig> {
        let mut p = PriorConfig::default_for(g, d);
        let theta: Option<Vec<f64>> = self
            .get("prior.theta")
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("cannot parse `{x}` in prior.theta")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        match (self.usize("model.k_comm")?, theta) {
            (Some(k), Some(t)) => {
                if t.len() != k + 1 {
                    return Err(Error::Config(format!(
                        "prior.theta has {} entries but model.k_comm = {k} needs {}",
                        t.len(),
                        k + 1
                    )));
                }
                p.k_comm = k;
                p.theta_c = t;
            }
            (Some(k), None) => p = p.with_k_comm(k),
            (None, Some(t)) => {
                p.k_comm = t.len().saturating_sub(1);
                p.theta_c = t;
            }
            (None, None) => {}
        }
        if let Some(t) = self.trunc("alpha")? {
            p.alpha = t;
        }
        if let Some(t) = self.trunc("gamma")? {
            p.gamma = t;
        }
        if let Some(t) = self.trunc("phi")? {
            p.phi = t;
        }
        if let Some(t) = self.trunc("r")? {
            p.radius = t;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn fit_plan(&self) -> Result<FitPlan> {
        let mut plan = FitPlan::default();
        if let Some(v) = self.usize("sampler.init_iters")? {
            plan.init_iters = v;
        }
        if let Some(v) = self.usize("sampler.iters")? {
            plan.iters = v;
            if self.get("sampler.burn_in").is_none() {
                plan.burn_in = v / 2;
            }
        }
        if let Some(v) = self.usize("sampler.burn_in")? {
            plan.burn_in = v;
        }
        if let Some(v) = self.usize("sampler.thin")? {
            plan.thin = v;
        }
        if let Some(v) = self.bool("sampler.adapt")? {
            plan.adapt = v;
        }
        if let Some(v) = self.usize("sampler.adapt_window")? {
            plan.adapt_window = v;
        }
        let keys = ["sampler.prop.alpha", "sampler.prop.gamma", "sampler.prop.phi", "sampler.prop.r"];
        let vals = keys.iter().map(|k| self.f64(k)).collect::<Result<Vec<_>>>()?;
        if vals.iter().any(Option::is_some) {
            if let Some(k) = keys.iter().zip(&vals).find(|(_, v)| v.is_none()).map(|(k, _)| k) {
                return Err(Error::MissingKey((*k).into()));
            }
            plan.proposal = Some(ProposalScales {
                alpha: vals[0].unwrap(),
                gamma: vals[1].unwrap(),
                phi: vals[2].unwrap(),
                radius: vals[3].unwrap(),
            });
        }
        if plan.iters == 0 || plan.burn_in >= plan.iters {
            return Err(Error::Config(format!(
                "sampler.burn_in ({}) must be below sampler.iters ({})",
                plan.burn_in, plan.iters
            )));
        }
        if plan.thin == 0 || plan.adapt_window == 0 {
            return Err(Error::Config("sampler.thin and sampler.adapt_window must be >= 1".into()));
        }
        Ok(plan)
    }

    pub fn crossval(&self, seed: u64) -> Result<CrossvalConfig> {
        let mut cv = CrossvalConfig {
            seed,
            plan: self.fit_plan()?,
            degree_term: self.degree_term()?,
            k_comm: self.usize("model.k_comm")?,
            ..CrossvalConfig::default()
        };
        if let Some(v) = self.usize("cv.folds")? {
            cv.folds = v;
        }
        if let Some(v) = self.usize("cv.quantile_bins")? {
            cv.quantile_bins = v;
        }
        match self.get("cv.negatives") {
            None | Some("all") => {}
            Some(v) => {
                let ratio: f64 = v.parse().map_err(|_| {
                    Error::Config(format!("cv.negatives must be `all` or a ratio, got `{v}`"))
                })?;
                if !(ratio > 0.0) {
                    return Err(Error::Config("cv.negatives ratio must be positive".into()));
                }
                cv.negatives = Negatives::Sampled { ratio };
            }
        }
        cv.scoring = match self.get("cv.scoring") {
            None | Some("predictive") => Scoring::Predictive,
            Some("map") => Scoring::Map,
            Some(v) => {
                return Err(Error::Config(format!(
                    "cv.scoring must be `predictive` or `map`, got `{v}`"
                )))
            }
        };
        Ok(cv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::pairwise_distances;

    fn toy() -> (SpatialGraph, DistanceMatrix) {
        let g = SpatialGraph::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![[0.0, 0.0], [3.0, 4.0], [6.0, 0.0]],
            [(0, 1)],
        )
        .unwrap();
        let d = pairwise_distances(&g);
        (g, d)
    }

    #[test]
    fn parses_comments_and_values() {
        let c = RunConfig::parse(
            "# header\nprior.alpha.mu = 10   # trailing\nprior.alpha.sigma=8.94\n\nsampler.iters = 300\n",
            "c.cfg",
        )
        .unwrap();
        let (g, d) = toy();
        let p = c.priors(&g, &d).unwrap();
        assert_eq!(p.alpha, TruncNormal { mu: 10.0, sigma: 8.94 });
        let plan = c.fit_plan().unwrap();
        assert_eq!((plan.iters, plan.burn_in), (300, 150));
    }

    #[test]
    fn partial_block_names_missing_key() {
        let c = RunConfig::parse("prior.gamma.mu = 1\n", "c").unwrap();
        let (g, d) = toy();
        let e = c.priors(&g, &d).unwrap_err();
        assert!(matches!(&e, Error::MissingKey(k) if k == "prior.gamma.sigma"));
        assert!(e.to_string().contains("prior.gamma.sigma"));
        let c = RunConfig::parse("sampler.prop.alpha = 0.1\n", "c").unwrap();
        assert!(matches!(c.fit_plan().unwrap_err(), Error::MissingKey(k) if k == "sampler.prop.gamma"));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let e = RunConfig::parse("a = 1\nprior.alphа.mu = 2\n", "x.cfg").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        assert!(RunConfig::parse("prior.alpha.mu 3\n", "x").is_err());
        assert!(RunConfig::parse("sampler.iters = 3\nsampler.iters = 4\n", "x").is_err());
        let c = RunConfig::parse("sampler.iters = many\n", "x").unwrap();
        assert!(c.fit_plan().is_err());
    }

    #[test]
    fn theta_and_k_comm() {
        let (g, d) = toy();
        let c = RunConfig::parse("prior.theta = 0.5, 0.25, 0.25\n", "x").unwrap();
        let p = c.priors(&g, &d).unwrap();
        assert_eq!(p.k_comm, 2);
        let c = RunConfig::parse("prior.theta = 0.5, 0.5\nmodel.k_comm = 3\n", "x").unwrap();
        assert!(c.priors(&g, &d).is_err());
        let c = RunConfig::parse("model.k_comm = 4\n", "x").unwrap();
        assert_eq!(c.priors(&g, &d).unwrap().theta_c.len(), 5);
    }

    #[test]
    fn crossval_settings() {
        let c = RunConfig::parse("cv.negatives = 5\ncv.scoring = map\ncv.folds = 4\n", "x").unwrap();
        let cv = c.crossval(3).unwrap();
        assert_eq!(cv.negatives, Negatives::Sampled { ratio: 5.0 });
        assert_eq!(cv.scoring, Scoring::Map);
        assert_eq!((cv.folds, cv.seed), (4, 3));
    }
}
