//! The distributed cache network: one LRU store per DTN and the lookup chain
//! that resolves where a segment will be served from.
//!
//! Peer contents are visible through an omniscient directory, a simulation
//! privilege; a deployment would need a metadata protocol in its place.

use std::collections::BTreeMap;

use super::lru::LruCache;
use super::segment::SegmentKey;
use crate::netsim::{NodeId, Routes, Topology};

/// Serving tier, ordered from cheapest to most expensive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    Local,
    Group,
    Peer,
    Origin,
}

impl Tier {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Local => "local",
            Tier::Group => "group",
            Tier::Peer => "peer",
            Tier::Origin => "origin",
        }
    }
}

/// Where a lookup resolved: the tier and the concrete node that serves it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    pub tier: Tier,
    pub node: NodeId,
}

/// Which part of the chain a mode is allowed to search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainScope {
    /// Home cache, then origin.
    HomeOnly,
    /// Home, group, peers by estimated transfer time, then origin.
    Full,
}

/// Per-DTN caches, keyed by node.
#[derive(Debug, Clone)]
pub struct CacheNetwork {
    caches: BTreeMap<NodeId, LruCache>,
}

impl CacheNetwork {
    /// One cache per non-origin node with a storage budget. `capacity_override`
    /// replaces every node's budget when set.
    pub fn new(topo: &Topology, capacity_override: Option<u64>) -> Self {
        let mut caches = BTreeMap::new();
        for n in topo.dtns() {
            let cap = capacity_override.unwrap_or(topo.node(n).storage_bytes);
            if cap > 0 {
                caches.insert(n, LruCache::new(cap));
            }
        }
        CacheNetwork { caches }
    }

    pub fn cache_mut(&mut self, node: NodeId) -> Option<&mut LruCache> {
        self.caches.get_mut(&node)
    }

    pub fn cache(&self, node: NodeId) -> Option<&LruCache> {
        self.caches.get(&node)
    }

    pub fn contains(&self, node: NodeId, key: &SegmentKey) -> bool {
        self.caches.get(&node).map(|c| c.contains(key)).unwrap_or(false)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.caches.keys().copied()
    }

    /// Any DTN currently holding the key, if one exists.
    pub fn any_holder(&self, key: &SegmentKey) -> Option<NodeId> {
        self.caches
            .iter()
            .find(|(_, c)| c.contains(key))
            .map(|(&n, _)| n)
    }

    /// The origin facility archiving an object. Objects are spread over the
    /// origin nodes (sorted by id) round robin, which models each facility
    /// hosting its own archive.
    pub fn origin_of(topo: &Topology, object: crate::workload::ObjectId) -> NodeId {
        let mut origins: Vec<NodeId> = topo.origins().collect();
        origins.sort_by(|&a, &b| topo.node(a).id.cmp(&topo.node(b).id));
        origins[object.0 as usize % origins.len()]
    }

    /// Resolves the serving location for a segment: home, then the user's
    /// group DTN, then remaining peers in ascending estimated transfer time,
    /// then the object's origin facility, which always holds everything.
    #[allow(clippy::too_many_arguments)]
    pub fn lookup_chain(
        &self,
        topo: &Topology,
        routes: &Routes,
        key: &SegmentKey,
        size: u64,
        home: NodeId,
        group: Option<NodeId>,
        scope: ChainScope,
    ) -> Located {
        if self.contains(home, key) {
            return Located {
                tier: Tier::Local,
                node: home,
            };
        }
        if scope == ChainScope::Full {
            if let Some(g) = group {
                if g != home && self.contains(g, key) {
                    return Located {
                        tier: Tier::Group,
                        node: g,
                    };
                }
            }
            let mut peers: Vec<NodeId> = self
                .caches
                .keys()
                .copied()
                .filter(|&n| n != home && Some(n) != group)
                .collect();
            peers.sort_by(|&a, &b| {
                routes
                    .est_transfer(a, home, size)
                    .total_cmp(&routes.est_transfer(b, home, size))
                    .then_with(|| topo.node(a).id.cmp(&topo.node(b).id))
            });
            for p in peers {
                if self.contains(p, key) {
                    return Located {
                        tier: Tier::Peer,
                        node: p,
                    };
                }
            }
        }
        Located {
            tier: Tier::Origin,
            node: Self::origin_of(topo, key.object),
        }
    }
}
