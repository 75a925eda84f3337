//! Network topology: nodes (DTNs and origin facilities) and bidirectional
//! links with fixed bandwidth and latency.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense node index within a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// Dense link index within a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub storage_bytes: u64,
    pub is_origin: bool,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: f64,
    pub latency_s: f64,
}

impl Link {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFileNode {
    id: String,
    storage_bytes: u64,
    is_origin: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFileLink {
    a: String,
    b: String,
    #[serde(rename = "bandwidth_Bps")]
    bandwidth_bps: f64,
    latency_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    nodes: Vec<TopologyFileNode>,
    links: Vec<TopologyFileLink>,
}

/// A validated, connected network of nodes and bidirectional links.
#[derive(Debug, Clone)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    /// Per node: outgoing (link, neighbor) pairs, in link order.
    pub adjacency: Vec<Vec<(LinkId, NodeId)>>,
    index: HashMap<String, NodeId>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, raw_links: Vec<(String, String, f64, f64)>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), NodeId(i as u32)).is_some() {
                return Err(Error::validation(format!("duplicate node id {}", n.id)));
            }
        }
        if !nodes.iter().any(|n| n.is_origin) {
            return Err(Error::validation("topology has no origin node"));
        }
        let mut links = Vec::new();
        for (a, b, bandwidth, latency) in raw_links {
            let a = *index
                .get(&a)
                .ok_or_else(|| Error::UnknownNode(a.clone()))?;
            let b = *index
                .get(&b)
                .ok_or_else(|| Error::UnknownNode(b.clone()))?;
            if bandwidth <= 0.0 {
                return Err(Error::validation("link bandwidth must be > 0"));
            }
            if latency < 0.0 {
                return Err(Error::validation("link latency must be >= 0"));
            }
            links.push(Link {
                a,
                b,
                bandwidth_bps: bandwidth,
                latency_s: latency,
            });
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (li, l) in links.iter().enumerate() {
            adjacency[l.a.0 as usize].push((LinkId(li as u32), l.b));
            adjacency[l.b.0 as usize].push((LinkId(li as u32), l.a));
        }
        let topo = Topology {
            nodes,
            links,
            adjacency,
            index,
        };
        topo.check_connected()?;
        Ok(topo)
    }

    fn check_connected(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::validation("topology has no nodes"));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &(_, next) in &self.adjacency[n.0 as usize] {
                if !seen[next.0 as usize] {
                    seen[next.0 as usize] = true;
                    stack.push(next);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::validation("topology is not connected"))
        }
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    /// Non-origin nodes, in index order. These are the cache sites.
    pub fn dtns(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_origin)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn origins(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_origin)
            .map(|(i, _)| NodeId(i as u32))
    }

    /// Scales every link bandwidth by `factor`; used for robustness studies.
    pub fn scale_bandwidth(&mut self, factor: f64) {
        for l in &mut self.links {
            l.bandwidth_bps *= factor;
        }
    }

    /// Overrides the storage budget of every non-origin node.
    pub fn set_dtn_storage(&mut self, bytes: u64) {
        for n in &mut self.nodes {
            if !n.is_origin {
                n.storage_bytes = bytes;
            }
        }
    }

    pub fn load(path: &Path) -> Result<Topology> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: TopologyFile = serde_json::from_str(&raw)
            .map_err(|e| Error::parse(path.display().to_string(), e.line() as u64, e.to_string()))?;
        Topology::new(
            file.nodes
                .into_iter()
                .map(|n| Node {
                    id: n.id,
                    storage_bytes: n.storage_bytes,
                    is_origin: n.is_origin,
                })
                .collect(),
            file.links
                .into_iter()
                .map(|l| (l.a, l.b, l.bandwidth_bps, l.latency_s))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| TopologyFileNode {
                    id: n.id.clone(),
                    storage_bytes: n.storage_bytes,
                    is_origin: n.is_origin,
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| TopologyFileLink {
                    a: self.node(l.a).id.clone(),
                    b: self.node(l.b).id.clone(),
                    bandwidth_bps: l.bandwidth_bps,
                    latency_s: l.latency_s,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }

    /// The evaluation topology: seven DTNs and two origin facilities joined
    /// by a WAN hub. Bandwidth and latency values are placeholders sized so
    /// the origin uplinks are the bottleneck under an uncached replay.
    pub fn default_evaluation() -> Topology {
        let mut nodes = vec![Node {
            id: "wan0".into(),
            storage_bytes: 0,
            is_origin: false,
        }];
        let mut links = Vec::new();
        for i in 1..=7u32 {
            nodes.push(Node {
                id: format!("dtn{i}"),
                storage_bytes: 200_000_000_000,
                is_origin: false,
            });
            links.push((
                format!("dtn{i}"),
                "wan0".to_string(),
                25_000_000.0,
                0.004 + 0.002 * i as f64,
            ));
        }
        for (i, lat) in [(1u32, 0.025), (2, 0.030)] {
            nodes.push(Node {
                id: format!("origin{i}"),
                storage_bytes: 0,
                is_origin: true,
            });
            links.push((format!("origin{i}"), "wan0".to_string(), 6_000_000.0, lat));
        }
        Topology::new(nodes, links).expect("default topology is valid")
    }
}
