//! Holdout splitting, top-K recommendation, and ranking metrics.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::kg::Ckg;
use super::model::predict_score;
use crate::{Error, Result};

/// Chronological per-user holdout over canonical (user, item) pairs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<(String, String)>,
    pub test: Vec<(String, String)>,
}

/// Splits interactions per user: the last `frac` of each user's pairs (by
/// first-interaction order, minimum one) are held out. Users with a single
/// interaction keep it in training; there is nothing to evaluate for them.
pub fn holdout_split(interactions: &[(String, String)], frac: f64) -> Split {
    let mut per_user: BTreeMap<&str, Vec<&(String, String)>> = BTreeMap::new();
    for pair in interactions {
        per_user.entry(pair.0.as_str()).or_default().push(pair);
    }
    let mut split = Split::default();
    for (_, pairs) in per_user {
        let n = pairs.len();
        if n < 2 {
            for p in pairs {
                split.train.push(p.clone());
            }
            continue;
        }
        let n_test = ((n as f64 * frac).floor() as usize).max(1);
        let cut = n - n_test;
        for (i, p) in pairs.into_iter().enumerate() {
            if i < cut {
                split.train.push(p.clone());
            } else {
                split.test.push(p.clone());
            }
        }
    }
    split
}

/// Ranks the unseen items for one user by descending score, ties broken by
/// the canonical item id.
pub fn recommend_topk(
    ckg: &Ckg,
    repr: &[Vec<f64>],
    user: &str,
    k: usize,
    exclude_seen: bool,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::config("top-k needs k >= 1"));
    }
    let u = ckg
        .entity_index(user)
        .filter(|idx| ckg.entities[*idx as usize].starts_with("user:"))
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    let seen: HashSet<u32> = if exclude_seen {
        ckg.interactions
            .iter()
            .filter(|(iu, _)| *iu == u)
            .map(|(_, it)| *it)
            .collect()
    } else {
        HashSet::new()
    };
    let mut scored: Vec<(u32, f64)> = ckg
        .items
        .iter()
        .filter(|it| !seen.contains(it))
        .map(|&it| (it, predict_score(repr, u, it)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| ckg.entities[a.0 as usize].cmp(&ckg.entities[b.0 as usize]))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(it, s)| (ckg.entities[it as usize].clone(), s))
        .collect())
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub recall: f64,
    pub ndcg: f64,
    /// Users that contributed to the means.
    pub evaluated_users: usize,
}

/// Recall@K and NDCG@K (binary gains, log2 discount) against held-out pairs.
///
/// Users without held-out items, or unknown to the model, are excluded from
/// the means.
pub fn evaluate(
    ckg: &Ckg,
    repr: &[Vec<f64>],
    test: &[(String, String)],
    k: usize,
) -> Result<EvalResult> {
    if k == 0 {
        return Err(Error::config("evaluation needs k >= 1"));
    }
    let mut held: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
    for (u, i) in test {
        held.entry(u.as_str()).or_default().insert(i.as_str());
    }
    let mut recall_sum = 0.0;
    let mut ndcg_sum = 0.0;
    let mut n_users = 0usize;
    for (user, items) in held {
        if items.is_empty() || ckg.entity_index(user).is_none() {
            continue;
        }
        let top = recommend_topk(ckg, repr, user, k, true)?;
        let mut hits = 0usize;
        let mut dcg = 0.0;
        for (rank, (item, _)) in top.iter().enumerate() {
            if items.contains(item.as_str()) {
                hits += 1;
                dcg += 1.0 / ((rank + 2) as f64).log2();
            }
        }
        let ideal: f64 = (0..items.len().min(k))
            .map(|p| 1.0 / ((p + 2) as f64).log2())
            .sum();
        recall_sum += hits as f64 / items.len() as f64;
        ndcg_sum += if ideal > 0.0 { dcg / ideal } else { 0.0 };
        n_users += 1;
    }
    if n_users == 0 {
        return Ok(EvalResult::default());
    }
    Ok(EvalResult {
        recall: recall_sum / n_users as f64,
        ndcg: ndcg_sum / n_users as f64,
        evaluated_users: n_users,
    })
}
