//! Static min-latency routing.
//!
//! Paths minimize total link latency; exact ties are broken by the
//! lexicographically smallest node-id sequence, so routing is deterministic
//! for any topology.

use super::topology::{LinkId, NodeId, Topology};
use crate::{Error, Result};

/// Computes the min-latency link path from `src` to `dst`.
///
/// `src == dst` yields an empty path.
pub fn route(topo: &Topology, src: NodeId, dst: NodeId) -> Result<Vec<LinkId>> {
    if src.0 as usize >= topo.nodes.len() || dst.0 as usize >= topo.nodes.len() {
        return Err(Error::UnknownNode(format!("#{}/{}", src.0, dst.0)));
    }
    if src == dst {
        return Ok(Vec::new());
    }

    let n = topo.nodes.len();
    let mut dist: Vec<Option<f64>> = vec![None; n];
    let mut node_path: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    dist[src.0 as usize] = Some(0.0);
    node_path[src.0 as usize] = vec![src];

    // Fixpoint relaxation; the node count is small, and this makes the
    // (distance, lexicographic path) ordering straightforward to enforce.
    let lex_less = |a: &[NodeId], b: &[NodeId]| -> bool {
        let names_a: Vec<&str> = a.iter().map(|&x| topo.node(x).id.as_str()).collect();
        let names_b: Vec<&str> = b.iter().map(|&x| topo.node(x).id.as_str()).collect();
        names_a < names_b
    };
    let mut changed = true;
    while changed {
        changed = false;
        for (li, link) in topo.links.iter().enumerate() {
            for (u, v) in [(link.a, link.b), (link.b, link.a)] {
                let Some(du) = dist[u.0 as usize] else { continue };
                let cand = du + link.latency_s;
                let mut path = node_path[u.0 as usize].clone();
                path.push(v);
                let take = match dist[v.0 as usize] {
                    None => true,
                    Some(dv) => cand < dv || (cand == dv && lex_less(&path, &node_path[v.0 as usize])),
                };
                if take {
                    dist[v.0 as usize] = Some(cand);
                    node_path[v.0 as usize] = path;
                    changed = true;
                }
                let _ = li;
            }
        }
    }

    if dist[dst.0 as usize].is_none() {
        return Err(Error::Disconnected {
            src: topo.node(src).id.clone(),
            dst: topo.node(dst).id.clone(),
        });
    }

    // node sequence -> link sequence; parallel links pick the lowest latency,
    // then the smallest index
    let seq = &node_path[dst.0 as usize];
    let mut links = Vec::with_capacity(seq.len() - 1);
    for pair in seq.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let best = topo.adjacency[u.0 as usize]
            .iter()
            .filter(|(_, next)| *next == v)
            .min_by(|(l1, _), (l2, _)| {
                topo.link(*l1)
                    .latency_s
                    .total_cmp(&topo.link(*l2).latency_s)
                    .then(l1.cmp(l2))
            })
            .map(|(l, _)| *l)
            .expect("relaxed path uses existing links");
        links.push(best);
    }
    Ok(links)
}

/// All-pairs route table with derived per-path costs.
#[derive(Debug, Clone)]
pub struct Routes {
    paths: Vec<Vec<Vec<LinkId>>>,
    latency: Vec<Vec<f64>>,
    bottleneck: Vec<Vec<f64>>,
}

impl Routes {
    pub fn compute(topo: &Topology) -> Result<Routes> {
        let n = topo.nodes.len();
        let mut paths = vec![vec![Vec::new(); n]; n];
        let mut latency = vec![vec![0.0; n]; n];
        let mut bottleneck = vec![vec![f64::INFINITY; n]; n];
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                let p = route(topo, NodeId(s as u32), NodeId(d as u32))?;
                latency[s][d] = p.iter().map(|&l| topo.link(l).latency_s).sum();
                bottleneck[s][d] = p
                    .iter()
                    .map(|&l| topo.link(l).bandwidth_bps)
                    .fold(f64::INFINITY, f64::min);
                paths[s][d] = p;
            }
        }
        Ok(Routes {
            paths,
            latency,
            bottleneck,
        })
    }

    pub fn path(&self, src: NodeId, dst: NodeId) -> &[LinkId] {
        &self.paths[src.0 as usize][dst.0 as usize]
    }

    pub fn latency(&self, src: NodeId, dst: NodeId) -> f64 {
        self.latency[src.0 as usize][dst.0 as usize]
    }

    /// Uncontended transfer-time estimate: path latency plus transmission at
    /// the bottleneck bandwidth.
    pub fn est_transfer(&self, src: NodeId, dst: NodeId, bytes: u64) -> f64 {
        if src == dst {
            return 0.0;
        }
        self.latency(src, dst) + bytes as f64 / self.bottleneck[src.0 as usize][dst.0 as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::Node;

    fn node(id: &str) -> Node {
        Node {
            id: id.into(),
            storage_bytes: 1,
            is_origin: id.starts_with("o"),
        }
    }

    #[test]
    fn identity_route_is_empty() {
        let topo = Topology::new(
            vec![node("oa"), node("b")],
            vec![("oa".into(), "b".into(), 1.0, 1.0)],
        )
        .unwrap();
        let a = topo.node_id("oa").unwrap();
        assert!(route(&topo, a, a).unwrap().is_empty());
    }

    #[test]
    fn line_route_takes_both_links() {
        let topo = Topology::new(
            vec![node("oa"), node("b"), node("c")],
            vec![
                ("oa".into(), "b".into(), 1.0, 1.0),
                ("b".into(), "c".into(), 1.0, 1.0),
            ],
        )
        .unwrap();
        let a = topo.node_id("oa").unwrap();
        let c = topo.node_id("c").unwrap();
        let p = route(&topo, a, c).unwrap();
        assert_eq!(p.len(), 2);
        let total: f64 = p.iter().map(|&l| topo.link(l).latency_s).sum();
        assert_eq!(total, 2.0);
    }

    #[test]
    fn triangle_prefers_cheaper_detour() {
        let topo = Topology::new(
            vec![node("oa"), node("b"), node("c")],
            vec![
                ("oa".into(), "b".into(), 1.0, 5.0),
                ("oa".into(), "c".into(), 1.0, 1.0),
                ("c".into(), "b".into(), 1.0, 1.0),
            ],
        )
        .unwrap();
        let a = topo.node_id("oa").unwrap();
        let b = topo.node_id("b").unwrap();
        let p = route(&topo, a, b).unwrap();
        assert_eq!(p.len(), 2, "expected detour via c");
    }

    #[test]
    fn equal_latency_tie_breaks_lexicographically() {
        // two equal-cost two-hop paths a-m1-z and a-m2-z
        let topo = Topology::new(
            vec![node("oa"), node("m2"), node("m1"), node("z")],
            vec![
                ("oa".into(), "m2".into(), 1.0, 1.0),
                ("oa".into(), "m1".into(), 1.0, 1.0),
                ("m2".into(), "z".into(), 1.0, 1.0),
                ("m1".into(), "z".into(), 1.0, 1.0),
            ],
        )
        .unwrap();
        let a = topo.node_id("oa").unwrap();
        let z = topo.node_id("z").unwrap();
        let p = route(&topo, a, z).unwrap();
        let via = topo.link(p[0]).other(a);
        assert_eq!(topo.node(via).id, "m1");
    }

    #[test]
    fn disconnected_pair_errors() {
        let topo = Topology::new(
            vec![node("oa"), node("b")],
            vec![("oa".into(), "b".into(), 1.0, 1.0)],
        )
        .unwrap();
        // same topology, but ask for a node that does not exist
        assert!(route(&topo, NodeId(0), NodeId(9)).is_err());
    }
}
