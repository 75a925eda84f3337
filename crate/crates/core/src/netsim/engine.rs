//! Event-driven flow engine.
//!
//! Flows occupy every link of their precomputed route while transmitting.
//! A flow's rate is the minimum over its links of `bandwidth / n_active`,
//! recomputed only when a flow starts or finishes transmitting, so rates are
//! piecewise constant and completion times are exact. Path latency is charged
//! once, after the last byte leaves the path.
//!
//! The queue orders events by `(time, insertion sequence)`, which makes every
//! run a deterministic function of the flow schedule.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::route::Routes;
use super::topology::{LinkId, NodeId, Topology};
use crate::Result;

pub type Token = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// All bytes of the flow have arrived at its destination.
    FlowDelivered(FlowId),
    Timer(Token),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
enum Pending {
    TxEnd { flow: FlowId, generation: u32 },
    Delivered(FlowId),
    Timer(Token),
}

struct HeapEntry {
    time: f64,
    seq: u64,
    pending: Pending,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone)]
struct FlowState {
    src: NodeId,
    dst: NodeId,
    size: f64,
    path: Vec<LinkId>,
    latency: f64,
    t_start: f64,
    bytes_done: f64,
    rate: f64,
    last_update: f64,
    generation: u32,
    transmitting: bool,
}

/// Read-only view of one flow.
#[derive(Debug, Clone)]
pub struct FlowInfo {
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u64,
    pub hops: usize,
    pub t_start: f64,
}

pub struct Engine {
    topo: Topology,
    routes: Routes,
    time: f64,
    seq: u64,
    heap: BinaryHeap<Reverse<HeapEntry>>,
    flows: Vec<FlowState>,
    link_active: Vec<BTreeSet<u32>>,
}

impl Engine {
    pub fn new(topo: Topology) -> Result<Engine> {
        let routes = Routes::compute(&topo)?;
        let link_active = vec![BTreeSet::new(); topo.links.len()];
        Ok(Engine {
            topo,
            routes,
            time: 0.0,
            seq: 0,
            heap: BinaryHeap::new(),
            flows: Vec::new(),
            link_active,
        })
    }

    pub fn now(&self) -> f64 {
        self.time
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn routes(&self) -> &Routes {
        &self.routes
    }

    pub fn est_transfer(&self, src: NodeId, dst: NodeId, bytes: u64) -> f64 {
        self.routes.est_transfer(src, dst, bytes)
    }

    pub fn flow_info(&self, id: FlowId) -> FlowInfo {
        let f = &self.flows[id.0 as usize];
        FlowInfo {
            src: f.src,
            dst: f.dst,
            size_bytes: f.size as u64,
            hops: f.path.len(),
            t_start: f.t_start,
        }
    }

    fn push(&mut self, time: f64, pending: Pending) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(HeapEntry {
            time: time.max(self.time),
            seq,
            pending,
        }));
    }

    /// Schedules a caller-defined timer; times in the past fire now.
    pub fn schedule(&mut self, at: f64, token: Token) {
        self.push(at, Pending::Timer(token));
    }

    /// Starts a flow at the current simulation time.
    pub fn start_flow(&mut self, src: NodeId, dst: NodeId, size_bytes: u64) -> Result<FlowId> {
        let n = self.topo.nodes.len() as u32;
        if src.0 >= n || dst.0 >= n {
            return Err(crate::Error::UnknownNode(format!("#{}/{}", src.0, dst.0)));
        }
        let path = self.routes.path(src, dst).to_vec();
        let latency: f64 = path.iter().map(|&l| self.topo.link(l).latency_s).sum();
        let id = FlowId(self.flows.len() as u32);
        let transmitting = size_bytes > 0 && !path.is_empty();
        self.flows.push(FlowState {
            src,
            dst,
            size: size_bytes as f64,
            path: path.clone(),
            latency,
            t_start: self.time,
            bytes_done: 0.0,
            rate: 0.0,
            last_update: self.time,
            generation: 0,
            transmitting,
        });
        if transmitting {
            for &l in &path {
                self.link_active[l.0 as usize].insert(id.0);
            }
            self.recompute(&path);
        } else {
            self.flows[id.0 as usize].bytes_done = size_bytes as f64;
            self.push(self.time + latency, Pending::Delivered(id));
        }
        Ok(id)
    }

    /// Re-settles and re-rates every flow that shares a link in `links`,
    /// then reschedules their transmission-end events.
    fn recompute(&mut self, links: &[LinkId]) {
        let mut affected: BTreeSet<u32> = BTreeSet::new();
        for &l in links {
            affected.extend(self.link_active[l.0 as usize].iter().copied());
        }
        for fid in affected {
            let now = self.time;
            let (tx_end, generation) = {
                let f = &mut self.flows[fid as usize];
                f.bytes_done = (f.bytes_done + f.rate * (now - f.last_update)).min(f.size);
                f.last_update = now;
                f.generation += 1;
                f.rate = f
                    .path
                    .iter()
                    .map(|&l| {
                        self.link_active[l.0 as usize].len() as f64
                    })
                    .zip(f.path.iter().map(|&l| self.topo.link(l).bandwidth_bps))
                    .map(|(n, bw)| bw / n)
                    .fold(f64::INFINITY, f64::min);
                let remaining = ((f.size - f.bytes_done) / f.rate).max(0.0);
                (now + remaining, f.generation)
            };
            self.push(
                tx_end,
                Pending::TxEnd {
                    flow: FlowId(fid),
                    generation,
                },
            );
        }
    }

    /// Advances to the next externally visible event: a flow delivery or a
    /// timer. Returns `None` when the queue is drained.
    pub fn next_event(&mut self) -> Option<Event> {
        while let Some(Reverse(entry)) = self.heap.pop() {
            debug_assert!(entry.time >= self.time, "time went backwards");
            self.time = entry.time;
            match entry.pending {
                Pending::TxEnd { flow, generation } => {
                    let stale = self.flows[flow.0 as usize].generation != generation;
                    if stale {
                        continue;
                    }
                    let (path, latency) = {
                        let f = &mut self.flows[flow.0 as usize];
                        f.bytes_done = f.size;
                        f.last_update = self.time;
                        f.transmitting = false;
                        f.rate = 0.0;
                        f.generation += 1;
                        (f.path.clone(), f.latency)
                    };
                    for &l in &path {
                        self.link_active[l.0 as usize].remove(&flow.0);
                    }
                    self.recompute(&path);
                    self.push(self.time + latency, Pending::Delivered(flow));
                }
                Pending::Delivered(flow) => {
                    return Some(Event {
                        time: self.time,
                        kind: EventKind::FlowDelivered(flow),
                    });
                }
                Pending::Timer(token) => {
                    return Some(Event {
                        time: self.time,
                        kind: EventKind::Timer(token),
                    });
                }
            }
        }
        None
    }

    /// Sum of active flow rates on a link. Test hook for the work-conservation
    /// property on bottleneck links.
    pub fn link_rate_sum(&self, link: LinkId) -> f64 {
        self.link_active[link.0 as usize]
            .iter()
            .map(|&f| self.flows[f as usize].rate)
            .sum()
    }
}
