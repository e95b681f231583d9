//! Run manifests: everything needed to rerun a command and check its inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use lrss_core::io::write_json;
use lrss_core::{Error, Result};

use crate::commands::{self, Command, Outcome, Summary};

/// SHA-256 digests of every file a command read, keyed by path.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct Inputs(BTreeMap<String, String>);

impl Inputs {
    pub fn add(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.0.insert(path.display().to_string(), digest);
        Ok(())
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// The parsed invocation with every default filled in.
    pub invocation: Command,
    /// Values derived from the invocation (resolved angles, full configs).
    pub resolved: Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub inputs: Inputs,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub wall_time_s: f64,
}

pub fn write(cmd: &Command, inputs: Inputs, outcome: Outcome, wall_time_s: f64) -> Result<Summary> {
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        invocation: cmd.clone(),
        resolved: outcome.resolved,
        seeds: outcome.seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        threads: rayon::current_num_threads(),
        wall_time_s,
    };
    let path = cmd.manifest_path();
    write_json(&path, &manifest)?;
    let mut summary = outcome.summary;
    summary.lines.push(format!("manifest: {}", path.display()));
    Ok(summary)
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run
    pub manifest: PathBuf,
    /// Write outputs under this stem (directory for `roc`) instead of the original one
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reruns the recorded invocation after checking that its inputs are unchanged.
pub fn replay(args: &ReplayArgs) -> Result<Summary> {
    let text = fs::read_to_string(&args.manifest).map_err(|e| Error::io(&args.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: args.manifest.clone(),
        message: e.to_string(),
    })?;
    for (path, digest) in &manifest.inputs.0 {
        let now = file_digest(Path::new(path))?;
        if &now != digest {
            return Err(Error::Format {
                path: PathBuf::from(path),
                message: format!("input changed since the recorded run (sha256 {now}, recorded {digest})"),
            });
        }
    }
    let mut cmd = manifest.invocation;
    if let Some(out) = &args.out {
        cmd.set_out(out.clone());
    }
    commands::run(cmd)
}
