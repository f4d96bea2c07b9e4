use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::PosteriorTrace;
use crate::error::{Error, Result};

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub log_post: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

pub fn write_trace_jsonl<W: Write>(trace: &PosteriorTrace, mut w: W) -> Result<()> {
    for ((s, &iter), &log_post) in trace.samples.iter().zip(&trace.iters).zip(&trace.log_posts) {
        let rec = TraceRecord {
            iter,
            log_post,
            alpha: s.alpha,
            gamma: s.gamma,
            phi: s.phi,
            radii: s.radii.clone(),
            labels: s.labels.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")
            .map_err(|e| Error::InvalidInput(format!("writing trace: {e}")))?;
    }
    Ok(())
}

pub fn read_trace_jsonl<R: BufRead>(r: R, source: &str) -> Result<PosteriorTrace> {
    let mut records = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            path: source.into(),
            line: k as u64 + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: source.into(),
            line: k as u64 + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    PosteriorTrace::from_records(records)
}
