//! Source knowledge graphs and their consolidation into a collaborative
//! knowledge graph (CKG).
//!
//! Each affinity becomes its own graph over canonical string ids; alignment
//! is exact id match (ids are namespaced, lowercased, and trimmed), so nodes
//! shared between sources merge into one entity. The CKG adds an inverse for
//! every relation and indexes entities and relations densely in sorted order,
//! which keeps every downstream computation deterministic.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::workload::{Catalog, Request};
use crate::{Error, Result};

/// Knowledge source feeding the CKG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Locality,
    DomainModel,
    UserAssociation,
    Interactions,
    Noise,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Locality => "locality",
            Source::DomainModel => "domain_model",
            Source::UserAssociation => "user_association",
            Source::Interactions => "interactions",
            Source::Noise => "noise",
        }
    }

    pub fn parse(s: &str) -> Option<Source> {
        match s {
            "locality" => Some(Source::Locality),
            "domain_model" => Some(Source::DomainModel),
            "user_association" => Some(Source::UserAssociation),
            "interactions" => Some(Source::Interactions),
            "noise" => Some(Source::Noise),
            _ => None,
        }
    }

    /// The optional auxiliary sources (interactions are always included).
    pub fn auxiliary() -> [Source; 3] {
        [Source::Locality, Source::DomainModel, Source::UserAssociation]
    }
}

/// One knowledge source as (head, relation, tail) triples over canonical ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceKg {
    pub source: Source,
    pub triples: Vec<(String, String, String)>,
}

fn canon(namespace: &str, raw: &str) -> String {
    format!("{namespace}:{}", raw.trim().to_lowercase())
}

pub fn item_id(raw: &str) -> String {
    canon("item", raw)
}

pub fn user_id(raw: &str) -> String {
    canon("user", raw)
}

/// Builds the per-affinity source graphs plus the user-item interaction set.
///
/// Interactions keep one triple per distinct (user, item) pair, in order of
/// first appearance so chronological holdout splits stay well defined.
pub fn build_source_kgs(catalog: &Catalog, trace: &[Request]) -> Vec<SourceKg> {
    let mut locality = Vec::new();
    let mut domain = Vec::new();
    for o in &catalog.objects {
        let item = item_id(&o.object_id);
        locality.push((item.clone(), "located_in".into(), canon("region", &o.region_id)));
        locality.push((
            item.clone(),
            "mounted_on".into(),
            canon("instrument", &o.instrument_id),
        ));
        domain.push((item, "has_kind".into(), canon("kind", &o.data_kind)));
    }
    for r in &catalog.recipes {
        for input in &r.input_kinds {
            domain.push((
                canon("kind", input),
                "derives".into(),
                canon("kind", &r.product_kind),
            ));
        }
    }

    let mut association = Vec::new();
    for u in &catalog.users {
        association.push((
            user_id(&u.user_id),
            "member_of".into(),
            canon("org", &u.org_id),
        ));
    }

    let mut seen: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut interactions = Vec::new();
    for r in trace {
        if seen.insert((r.user.0, r.object.0)) {
            interactions.push((
                user_id(&catalog.user(r.user).user_id),
                "interact".into(),
                item_id(&catalog.object(r.object).object_id),
            ));
        }
    }

    vec![
        SourceKg {
            source: Source::Locality,
            triples: locality,
        },
        SourceKg {
            source: Source::DomainModel,
            triples: domain,
        },
        SourceKg {
            source: Source::UserAssociation,
            triples: association,
        },
        SourceKg {
            source: Source::Interactions,
            triples: interactions,
        },
    ]
}

/// `m` uniformly random (head, tail) pairs over the entity universe of the
/// given sources, under the dedicated `noise` relation.
pub fn inject_noise(sources: &[SourceKg], m: usize, seed: u64) -> SourceKg {
    let mut entities: BTreeSet<&str> = BTreeSet::new();
    for kg in sources {
        for (h, _, t) in &kg.triples {
            entities.insert(h);
            entities.insert(t);
        }
    }
    let pool: Vec<&str> = entities.into_iter().collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut triples = Vec::with_capacity(m);
    if pool.len() >= 2 {
        for _ in 0..m {
            let h = pool[rng.gen_range(0..pool.len())];
            let mut t = pool[rng.gen_range(0..pool.len())];
            while t == h {
                t = pool[rng.gen_range(0..pool.len())];
            }
            triples.push((h.to_string(), "noise".into(), t.to_string()));
        }
    }
    SourceKg {
        source: Source::Noise,
        triples,
    }
}

/// A directed triple over dense CKG indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

/// The collaborative knowledge graph: aligned entities, relations with
/// inverses, adjacency, and the user-item interaction list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ckg {
    pub entities: Vec<String>,
    /// Base relation at index 2i, its inverse at 2i+1.
    pub relations: Vec<String>,
    /// All directed triples, inverses included.
    pub triples: Vec<Triple>,
    /// Per entity: (relation, tail) neighbors, in triple insertion order.
    pub adjacency: Vec<Vec<(u32, u32)>>,
    pub users: Vec<u32>,
    pub items: Vec<u32>,
    /// Distinct (user entity, item entity) pairs, in first-seen order.
    pub interactions: Vec<(u32, u32)>,
}

impl Ckg {
    pub fn entity_index(&self, id: &str) -> Option<u32> {
        self.entities.binary_search_by(|e| e.as_str().cmp(id)).ok().map(|i| i as u32)
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }
}

/// Consolidates the selected sources into a CKG.
///
/// The interactions source must be selected and non-empty. Every relation
/// gains an inverse, and each triple appears in both directions.
pub fn build_ckg(sources: &[SourceKg], selection: &BTreeSet<Source>) -> Result<Ckg> {
    if !selection.contains(&Source::Interactions) {
        return Err(Error::config("interactions must always be included"));
    }
    let selected: Vec<&SourceKg> = sources
        .iter()
        .filter(|kg| selection.contains(&kg.source))
        .collect();
    let interactions_kg = selected
        .iter()
        .find(|kg| kg.source == Source::Interactions)
        .ok_or_else(|| Error::config("interactions source missing"))?;
    if interactions_kg.triples.is_empty() {
        return Err(Error::validation("empty interactions"));
    }

    let mut entity_set: BTreeSet<&str> = BTreeSet::new();
    let mut relation_set: BTreeSet<&str> = BTreeSet::new();
    for kg in &selected {
        for (h, r, t) in &kg.triples {
            entity_set.insert(h);
            relation_set.insert(r);
            entity_set.insert(t);
        }
    }
    let entities: Vec<String> = entity_set.iter().map(|s| s.to_string()).collect();
    let entity_idx: BTreeMap<&str, u32> = entity_set
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i as u32))
        .collect();
    let mut relations = Vec::new();
    let mut relation_idx: BTreeMap<&str, u32> = BTreeMap::new();
    for r in &relation_set {
        relation_idx.insert(r, relations.len() as u32);
        relations.push(r.to_string());
        relations.push(format!("{r}^-1"));
    }

    let mut triples = Vec::new();
    let mut adjacency = vec![Vec::new(); entities.len()];
    for kg in &selected {
        for (h, r, t) in &kg.triples {
            let h = entity_idx[h.as_str()];
            let t = entity_idx[t.as_str()];
            let r = relation_idx[r.as_str()];
            for (head, relation, tail) in [(h, r, t), (t, r + 1, h)] {
                triples.push(Triple {
                    head,
                    relation,
                    tail,
                });
                adjacency[head as usize].push((relation, tail));
            }
        }
    }

    let users: Vec<u32> = entities
        .iter()
        .enumerate()
        .filter(|(_, e)| e.starts_with("user:"))
        .map(|(i, _)| i as u32)
        .collect();
    let items: Vec<u32> = entities
        .iter()
        .enumerate()
        .filter(|(_, e)| e.starts_with("item:"))
        .map(|(i, _)| i as u32)
        .collect();

    let mut interactions = Vec::new();
    for (h, _, t) in &interactions_kg.triples {
        interactions.push((entity_idx[h.as_str()], entity_idx[t.as_str()]));
    }

    Ok(Ckg {
        entities,
        relations,
        triples,
        adjacency,
        users,
        items,
        interactions,
    })
}
