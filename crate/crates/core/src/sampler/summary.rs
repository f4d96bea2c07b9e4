use serde::{Deserialize, Serialize};

use super::{AcceptRates, PosteriorTrace};
use crate::error::{Error, Result};
use crate::model::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

impl ParamSummary {
    pub fn from_values(name: impl Into<String>, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        ParamSummary {
            name: name.into(),
            mean,
            sd,
            q025: quantile(&sorted, 0.025),
            q25: quantile(&sorted, 0.25),
            q50: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            q975: quantile(&sorted, 0.975),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub kind: ModelKind,
    pub samples: usize,
    pub params: Vec<ParamSummary>,
    pub accept_rates: Option<AcceptRates>,
    pub map_index: usize,
    pub map_log_post: f64,
    /// Potential scale reduction of the retained log-posterior series split
    /// into two halves; absent with fewer than four samples.
    pub split_rhat: Option<f64>,
    pub log_post_series: Vec<f64>,
}

/// Linear-interpolation quantile of an ascending slice (the "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Split-chain R̂ on a single series (two halves; odd middle element dropped).
pub fn split_rhat(series: &[f64]) -> Option<f64> {
    let half = series.len() / 2;
    if half < 2 {
        return None;
    }
    let a = &series[..half];
    let b = &series[series.len() - half..];
    let stats = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0);
        (m, v)
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    let nh = half as f64;
    let w = 0.5 * (va + vb);
    let grand = 0.5 * (ma + mb);
    let between = nh * ((ma - grand).powi(2) + (mb - grand).powi(2));
    if w == 0.0 {
        return Some(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (nh - 1.0) / nh * w + between / nh;
    Some((var_plus / w).sqrt())
}

/// Peak of a Gaussian kernel density estimate with Silverman's bandwidth.
pub fn posterior_mode(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(2.0)).sqrt();
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if !(h > 0.0) {
        return quantile(&sorted, 0.5);
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let points = 512;
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let dens: f64 = sorted.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
        if dens > best.0 {
            best = (dens, x);
        }
    }
    best.1
}

pub fn trace_summary(trace: &PosteriorTrace) -> Result<TraceSummary> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty trace".into()));
    }
    let col = |f: &dyn Fn(&crate::model::ParamState) -> f64| -> Vec<f64> {
        trace.samples.iter().map(f).collect()
    };
    let mut params = vec![
        ParamSummary::from_values("alpha", &col(&|s| s.alpha)),
        ParamSummary::from_values("gamma", &col(&|s| s.gamma)),
    ];
    if trace.kind == ModelKind::RadiusComms {
        params.push(ParamSummary::from_values("phi", &col(&|s| s.phi.unwrap_or(f64::NAN))));
    }
    let n = trace.samples[0].radii.len();
    for i in 0..n {
        params.push(ParamSummary::from_values(format!("r[{i}]"), &col(&|s| s.radii[i])));
    }
    Ok(TraceSummary {
        kind: trace.kind,
        samples: trace.len(),
        params,
        accept_rates: trace.accept_rates,
        map_index: trace.map_index,
        map_log_post: trace.log_posts[trace.map_index],
        split_rhat: split_rhat(&trace.log_posts),
        log_post_series: trace.log_posts.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamState;
    use rand::{Rng, SeedableRng};

    fn trace_of(alphas: &[f64], lps: &[f64]) -> PosteriorTrace {
        PosteriorTrace {
            kind: ModelKind::Radius,
            samples: alphas.iter().map(|&a| ParamState::radius(a, 1.0, vec![1.0])).collect(),
            iters: (1..=alphas.len()).collect(),
            log_posts: lps.to_vec(),
            accept_rates: None,
            map_index: 0,
            sweep_log_posts: vec![],
            final_scales: None,
        }
    }

    #[test]
    fn constant_series() {
        let t = trace_of(&[2.0; 10], &[-5.0; 10]);
        let s = trace_summary(&t).unwrap();
        assert_eq!(s.split_rhat, Some(1.0));
        assert_eq!(s.params[0].sd, 0.0);
        assert_eq!(s.params[0].mean, 2.0);
    }

    #[test]
    fn empty_trace_errors() {
        assert!(trace_summary(&trace_of(&[], &[])).is_err());
    }

    #[test]
    fn mean_and_quantiles_match_sorting_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let alphas: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 3.0).collect();
        let s = trace_summary(&trace_of(&alphas, &vec![0.0; 1000])).unwrap();
        let mean = alphas.iter().sum::<f64>() / 1000.0;
        assert!((s.params[0].mean - mean).abs() < 1e-12);
        let mut sorted = alphas.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // 1000 points: position 999q.
        let oracle = |q: f64| {
            let pos = 999.0 * q;
            let i = pos as usize;
            let frac = pos - i as f64;
            if i + 1 < 1000 {
                sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
            } else {
                sorted[i]
            }
        };
        assert!((s.params[0].q50 - oracle(0.5)).abs() < 1e-12);
        assert!((s.params[0].q25 - oracle(0.25)).abs() < 1e-12);
        assert!((s.params[0].q975 - oracle(0.975)).abs() < 1e-12);
        assert!((s.params[0].q025 - oracle(0.025)).abs() < 1e-12);
    }

    #[test]
    fn rhat_flags_shifted_halves() {
        let mut series = vec![0.0; 100];
        for (i, v) in series.iter_mut().enumerate() {
            *v = if i < 50 { (i % 7) as f64 } else { 100.0 + (i % 7) as f64 };
        }
        assert!(split_rhat(&series).unwrap() > 2.0);
        assert_eq!(split_rhat(&[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn kde_mode_finds_peak() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let v: Vec<f64> = (0..4000)
            .map(|_| {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                3.0 + 0.5 * z
            })
            .collect();
        assert!((posterior_mode(&v) - 3.0).abs() < 0.1);
    }
}
