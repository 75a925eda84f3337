//! Deterministic discrete-event network simulation: DTN topologies,
//! min-latency routing, and bulk data flows under fair-share link contention.

mod engine;
mod route;
mod topology;

pub use engine::{Engine, Event, EventKind, FlowId, FlowInfo, Token};
pub use route::{route, Routes};
pub use topology::{Link, LinkId, Node, NodeId, Topology};
