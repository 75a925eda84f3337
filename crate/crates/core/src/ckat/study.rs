//! Knowledge-combination and noise studies, plus model checkpointing.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, holdout_split, EvalResult, Split};
use super::kg::{build_ckg, build_source_kgs, inject_noise, Ckg, Source, SourceKg};
use super::model::{all_attention, propagate, Aggregator, EmbeddingParams};
use super::train::{train, TrainConfig};
use crate::workload::{Catalog, Request};
use crate::{Error, Result};

/// One row of a combination study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    /// `+`-joined source names, interactions included.
    pub sources: String,
    pub attention: bool,
    pub noise_triples: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub seed: u64,
    pub evaluated_users: usize,
}

impl StudyRow {
    pub const HEADER: &'static str = "sources,attention,noise_triples,recall,ndcg,seed,evaluated_users";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.sources,
            self.attention,
            self.noise_triples,
            self.recall,
            self.ndcg,
            self.seed,
            self.evaluated_users
        )
    }
}

fn sources_label(aux: &BTreeSet<Source>, noise: bool) -> String {
    let mut names = vec![Source::Interactions.as_str().to_string()];
    names.extend(aux.iter().map(|s| s.as_str().to_string()));
    if noise {
        names.push(Source::Noise.as_str().to_string());
    }
    names.join("+")
}

/// Builds, trains, and evaluates one source combination end to end.
///
/// Interactions are split chronologically per user before graph construction,
/// so held-out pairs never leak into training. `noise_m` random triples are
/// added under the `noise` relation when positive.
pub fn evaluate_combination(
    catalog: &Catalog,
    trace: &[Request],
    aux: &BTreeSet<Source>,
    noise_m: usize,
    cfg: &TrainConfig,
    k: usize,
    holdout_frac: f64,
) -> Result<(EvalResult, Ckg, super::train::Trained, Split)> {
    let mut kgs = build_source_kgs(catalog, trace);
    let interactions_pairs: Vec<(String, String)> = kgs
        .iter()
        .find(|kg| kg.source == Source::Interactions)
        .map(|kg| {
            kg.triples
                .iter()
                .map(|(h, _, t)| (h.clone(), t.clone()))
                .collect()
        })
        .unwrap_or_default();
    let split = holdout_split(&interactions_pairs, holdout_frac);
    for kg in &mut kgs {
        if kg.source == Source::Interactions {
            kg.triples = split
                .train
                .iter()
                .map(|(u, i)| (u.clone(), "interact".to_string(), i.clone()))
                .collect();
        }
    }

    let mut selection: BTreeSet<Source> = aux.clone();
    selection.insert(Source::Interactions);
    if noise_m > 0 {
        let selected: Vec<SourceKg> = kgs
            .iter()
            .filter(|kg| selection.contains(&kg.source))
            .cloned()
            .collect();
        kgs.push(inject_noise(&selected, noise_m, cfg.seed ^ 0x6e6f6973));
        selection.insert(Source::Noise);
    }

    let ckg = build_ckg(&kgs, &selection)?;
    let trained = train(&ckg, cfg)?;
    let attention = all_attention(&trained.params, &ckg, trained.attention_enabled);
    let repr = propagate(&trained.params, &ckg, &attention, trained.aggregator);
    let result = evaluate(&ckg, &repr, &split.test, k)?;
    Ok((result, ckg, trained, split))
}

/// Evaluates every subset of the auxiliary sources (interactions always
/// included), with attention on and off, at the given noise level.
pub fn run_combination_study(
    catalog: &Catalog,
    trace: &[Request],
    subsets: Option<&[BTreeSet<Source>]>,
    noise_m: usize,
    cfg: &TrainConfig,
    k: usize,
    holdout_frac: f64,
) -> Result<Vec<StudyRow>> {
    let default_subsets: Vec<BTreeSet<Source>> = {
        let aux = Source::auxiliary();
        (0..(1usize << aux.len()))
            .map(|mask| {
                aux.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &s)| s)
                    .collect()
            })
            .collect()
    };
    let subsets = subsets.unwrap_or(&default_subsets);

    let mut rows = Vec::new();
    for aux in subsets {
        for attention in [true, false] {
            let cfg = TrainConfig {
                attention,
                ..cfg.clone()
            };
            let (result, _, _, _) =
                evaluate_combination(catalog, trace, aux, noise_m, &cfg, k, holdout_frac)?;
            rows.push(StudyRow {
                sources: sources_label(aux, noise_m > 0),
                attention,
                noise_triples: noise_m,
                recall: result.recall,
                ndcg: result.ndcg,
                seed: cfg.seed,
                evaluated_users: result.evaluated_users,
            });
        }
    }
    Ok(rows)
}

/// A versioned, exactly round-tripping model dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub ckg: Ckg,
    pub params: EmbeddingParams,
    pub attention_enabled: bool,
    #[serde(default)]
    pub aggregator: Aggregator,
    pub split: Split,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn new(
        ckg: Ckg,
        params: EmbeddingParams,
        attention_enabled: bool,
        aggregator: Aggregator,
        split: Split,
    ) -> Checkpoint {
        Checkpoint {
            version: Self::VERSION,
            ckg,
            params,
            attention_enabled,
            aggregator,
            split,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Other(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let cp: Checkpoint = serde_json::from_str(&raw)
            .map_err(|e| Error::parse(path.display().to_string(), e.line() as u64, e.to_string()))?;
        if cp.version != Self::VERSION {
            return Err(Error::validation(format!(
                "unsupported checkpoint version {}",
                cp.version
            )));
        }
        Ok(cp)
    }

    /// Final representations for recommendation.
    pub fn representations(&self) -> Vec<Vec<f64>> {
        let attention = all_attention(&self.params, &self.ckg, self.attention_enabled);
        propagate(&self.params, &self.ckg, &attention, self.aggregator)
    }
}
