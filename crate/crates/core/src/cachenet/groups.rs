//! Virtual groups: clustering users with shared interests and geography, and
//! picking the cache DTN best connected to each group.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KmeansResult};
use crate::netsim::{NodeId, Routes, Topology};
use crate::workload::{Catalog, Request, UserId};
use crate::{Error, Result};

/// One virtual group and its assigned cache site.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirtualGroup {
    pub group_id: u32,
    pub members: Vec<String>,
    pub centroid: Vec<f64>,
    pub assigned_dtn: String,
}

/// Group assignment for every user, plus the groups themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Placement {
    pub groups: Vec<VirtualGroup>,
    /// user index -> group index
    pub user_group: Vec<u32>,
}

impl Placement {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("placement serializes")
    }

    pub fn group_dtn_of(&self, user: UserId, topo: &Topology) -> Option<NodeId> {
        let g = *self.user_group.get(user.0 as usize)? as usize;
        topo.node_id(&self.groups[g].assigned_dtn)
    }
}

/// Builds per-user feature vectors: weighted normalized coordinates joined
/// with a weighted, normalized interest histogram over (region, kind).
pub fn user_features(
    catalog: &Catalog,
    trace: &[Request],
    alpha: f64,
    beta: f64,
) -> Vec<Vec<f64>> {
    let mut regions: Vec<&str> = catalog.objects.iter().map(|o| o.region_id.as_str()).collect();
    regions.sort_unstable();
    regions.dedup();
    let mut kinds: Vec<&str> = catalog.objects.iter().map(|o| o.data_kind.as_str()).collect();
    kinds.sort_unstable();
    kinds.dedup();
    let region_idx: BTreeMap<&str, usize> =
        regions.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let kind_idx: BTreeMap<&str, usize> = kinds.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    let hist_dims = regions.len() * kinds.len();
    let n = catalog.users.len();
    let mut features = vec![vec![0.0; 2 + hist_dims]; n];
    for (u, profile) in catalog.users.iter().enumerate() {
        features[u][0] = profile.coord.0;
        features[u][1] = profile.coord.1;
    }
    for r in trace {
        let obj = catalog.object(r.object);
        let d = 2 + region_idx[obj.region_id.as_str()] * kinds.len()
            + kind_idx[obj.data_kind.as_str()];
        features[r.user.0 as usize][d] += 1.0;
    }

    // per-dimension min-max normalization, then the block weights
    let dims = 2 + hist_dims;
    for d in 0..dims {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for f in &features {
            lo = lo.min(f[d]);
            hi = hi.max(f[d]);
        }
        let span = hi - lo;
        let w = if d < 2 { alpha } else { beta };
        for f in &mut features {
            f[d] = if span > 0.0 { w * (f[d] - lo) / span } else { 0.0 };
        }
    }
    features
}

/// Runs k-means over the user features.
pub fn kmeans_users(
    features: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KmeansResult> {
    kmeans(features, k, seed, max_iter)
}

/// Picks the DTN best connected to a member set: the candidate minimizing the
/// summed (path latency + reference transfer time) from each member's home.
/// Candidates are non-origin nodes with storage; ties break on the node id.
pub fn assign_group_dtn(
    member_homes: &[NodeId],
    topo: &Topology,
    routes: &Routes,
    reference_size_bytes: u64,
) -> Result<NodeId> {
    if member_homes.is_empty() {
        return Err(Error::validation("group has no members"));
    }
    let mut best: Option<(f64, &str, NodeId)> = None;
    for cand in topo.dtns() {
        if topo.node(cand).storage_bytes == 0 {
            continue;
        }
        let cost: f64 = member_homes
            .iter()
            .map(|&h| routes.est_transfer(h, cand, reference_size_bytes))
            .sum();
        let name = topo.node(cand).id.as_str();
        let better = match &best {
            None => true,
            Some((c, n, _)) => cost < *c || (cost == *c && name < *n),
        };
        if better {
            best = Some((cost, name, cand));
        }
    }
    best.map(|(_, _, n)| n)
        .ok_or_else(|| Error::validation("no DTN with storage available"))
}

/// Clustering and placement knobs.
#[derive(Debug, Clone)]
pub struct PlacementConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub alpha: f64,
    pub beta: f64,
    pub reference_size_bytes: u64,
}

/// Clusters users and assigns each group its cache DTN.
pub fn build_placement(
    catalog: &Catalog,
    trace: &[Request],
    topo: &Topology,
    routes: &Routes,
    cfg: &PlacementConfig,
) -> Result<Placement> {
    if catalog.users.is_empty() {
        return Err(Error::validation("cannot place groups without users"));
    }
    let k = cfg.k.min(catalog.users.len()).max(1);
    let features = user_features(catalog, trace, cfg.alpha, cfg.beta);
    let km = kmeans_users(&features, k, cfg.seed, cfg.max_iter)?;

    let mut groups = Vec::new();
    let mut remap = vec![u32::MAX; k];
    for (gi, centroid) in km.centroids.iter().enumerate() {
        let members: Vec<usize> = km
            .assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == gi)
            .map(|(u, _)| u)
            .collect();
        if members.is_empty() {
            continue;
        }
        let homes: Vec<NodeId> = members
            .iter()
            .map(|&u| {
                topo.node_id(&catalog.users[u].home_dtn)
                    .ok_or_else(|| Error::UnknownNode(catalog.users[u].home_dtn.clone()))
            })
            .collect::<Result<_>>()?;
        let dtn = assign_group_dtn(&homes, topo, routes, cfg.reference_size_bytes)?;
        remap[gi] = groups.len() as u32;
        groups.push(VirtualGroup {
            group_id: groups.len() as u32,
            members: members
                .iter()
                .map(|&u| catalog.users[u].user_id.clone())
                .collect(),
            centroid: centroid.clone(),
            assigned_dtn: topo.node(dtn).id.clone(),
        });
    }
    let user_group = km.assignments.iter().map(|&a| remap[a]).collect();
    Ok(Placement { groups, user_group })
}
