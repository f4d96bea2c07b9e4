//! Output directory handling and the per-run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use radnet_core::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Common;

/// Bad user input detected by the CLI itself (as opposed to the library).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub settings: BTreeMap<String, serde_json::Value>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub duration_secs: f64,
}

pub struct Run {
    pub config: RunConfig,
    pub seed: u64,
    out: PathBuf,
    force: bool,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    pub fn start(command: &str, common: &Common) -> Result<Self> {
        let mut config = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &common.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| input_error(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            config.set(k.trim(), v.trim())?;
        }
        let seed = match common.seed {
            Some(s) => s,
            None => config.seed()?.unwrap_or(0),
        };
        let manifest_path = common.out.join("manifest.json");
        if manifest_path.exists() && !common.force {
            return Err(input_error(format!(
                "{} already holds a run; pass --force to overwrite",
                common.out.display()
            )));
        }
        fs::create_dir_all(&common.out)
            .with_context(|| format!("creating {}", common.out.display()))?;
        let mut manifest = RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.entries().clone(),
            settings: BTreeMap::new(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            duration_secs: 0.0,
        };
        manifest.seeds.insert("seed".into(), seed);
        if let Some(p) = &common.config {
            manifest.inputs.push(hash_file(p)?);
        }
        Ok(Run {
            config,
            seed,
            out: common.out.clone(),
            force: common.force,
            manifest,
            started: Instant::now(),
        })
    }

    /// Records the content hash of an input file.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let h = hash_file(path)?;
        self.manifest.inputs.push(h);
        Ok(())
    }

    pub fn setting(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.manifest
            .settings
            .insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn derived_seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.into(), seed);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.manifest.warnings.push(msg);
    }

    /// Opens `name` under the output directory, refusing to overwrite an
    /// existing file unless `--force` was given.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        if path.exists() && !self.force {
            return Err(input_error(format!(
                "{} exists; pass --force to overwrite",
                path.display()
            )));
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.manifest.outputs.push(name.into());
        Ok(BufWriter::new(f))
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        let path = self.out.join("manifest.json");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, &self.manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn hash_file(path: &Path) -> Result<InputHash> {
    let bytes = fs::read(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputHash {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}
