//! Scenario configuration: one JSON document covering inputs, generation,
//! delivery, and training, echoed in full into every run manifest.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lfsim_core::ckat::{Source, TrainConfig};
use lfsim_core::delivery::{DeliveryConfig, Mode};
use lfsim_core::workload::GeneratorParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Directory holding conventionally named inputs (catalog.csv, users.csv,
    /// recipes.csv, requests.csv, topology.json) for any path not set below.
    pub data_dir: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub users: Option<PathBuf>,
    pub recipes: Option<PathBuf>,
    pub requests: Option<PathBuf>,
    pub topology: Option<PathBuf>,

    pub generator: GeneratorParams,
    pub delivery: DeliveryConfig,
    pub train: TrainConfig,

    /// Auxiliary knowledge sources joined with interactions for training.
    pub ckat_sources: Vec<String>,
    pub ckat_k: usize,
    pub holdout_frac: f64,
    pub noise_triples: usize,

    /// Sweep axes.
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    /// Parallel worker slots for sweeps.
    pub jobs: usize,

    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            data_dir: None,
            catalog: None,
            users: None,
            recipes: None,
            requests: None,
            topology: None,
            generator: GeneratorParams::default(),
            delivery: DeliveryConfig::default(),
            train: TrainConfig::default(),
            ckat_sources: vec![
                "locality".into(),
                "domain_model".into(),
                "user_association".into(),
            ],
            ckat_k: 10,
            holdout_frac: 0.2,
            noise_triples: 0,
            modes: Mode::all().to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            jobs: 0,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: Option<&Path>) -> Result<ScenarioConfig> {
        match path {
            None => Ok(ScenarioConfig::default()),
            Some(p) => {
                let raw = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&raw)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    fn resolve(&self, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.clone());
        }
        if let Some(dir) = &self.data_dir {
            return Ok(dir.join(name));
        }
        bail!("no path for {name}: set it in the config or pass --data");
    }

    pub fn catalog_path(&self) -> Result<PathBuf> {
        self.resolve(&self.catalog, "catalog.csv")
    }

    pub fn users_path(&self) -> Result<PathBuf> {
        self.resolve(&self.users, "users.csv")
    }

    pub fn recipes_path(&self) -> Result<PathBuf> {
        self.resolve(&self.recipes, "recipes.csv")
    }

    pub fn requests_path(&self) -> Result<PathBuf> {
        self.resolve(&self.requests, "requests.csv")
    }

    /// Topology falls back to the built-in evaluation topology when unset.
    pub fn topology_path(&self) -> Option<PathBuf> {
        if let Some(p) = &self.topology {
            return Some(p.clone());
        }
        self.data_dir.as_ref().map(|d| d.join("topology.json")).filter(|p| p.exists())
    }

    pub fn aux_sources(&self) -> Result<BTreeSet<Source>> {
        let mut set = BTreeSet::new();
        for name in &self.ckat_sources {
            let s = Source::parse(name)
                .with_context(|| format!("unknown knowledge source {name:?}"))?;
            if s != Source::Interactions && s != Source::Noise {
                set.insert(s);
            }
        }
        Ok(set)
    }
}
