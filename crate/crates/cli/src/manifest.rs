//! Run manifests: every subcommand records its full effective configuration,
//! seed set, and config hash so any output is reproducible from the manifest
//! alone.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    app: &'static str,
    version: &'static str,
    command: &'a str,
    seeds: &'a [u64],
    config_sha256: String,
    config: &'a ScenarioConfig,
}

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seeds: &[u64],
    config: &ScenarioConfig,
) -> Result<()> {
    let config_json = serde_json::to_string_pretty(config)?;
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let manifest = Manifest {
        app: "lfsim",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seeds,
        config_sha256: hex::encode(hasher.finalize()),
        config,
    };
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))
}

/// Manifest for subcommands whose inputs are files plus a few scalars
/// rather than a scenario config.
pub fn write_args_manifest(
    out_dir: &Path,
    command: &str,
    args: &serde_json::Value,
) -> Result<()> {
    let manifest = serde_json::json!({
        "app": "lfsim",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}
