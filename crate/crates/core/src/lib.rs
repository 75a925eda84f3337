//! Trace-driven simulation and recommendation library for large-facility data services.
//!
//! The crate is organized around the two halves of an intelligent data service
//! stack for shared scientific observatories, plus the analysis layer both
//! build on:
//!
//! - [`workload`]: catalogs, request traces, synthetic workload generation,
//!   per-user access-pattern classification, and affinity statistics.
//! - [`netsim`]: a deterministic discrete-event network simulator with
//!   fair-share link contention, providing transfer timing for every fetch.
//! - [`cachenet`]: the distributed cache layer, holding per-DTN byte-budgeted
//!   LRU stores, segment keys, virtual-group clustering, and the lookup chain.
//! - [`delivery`]: the end-to-end delivery service, orchestrating prediction,
//!   pre-fetch scheduling, real-time streaming, and scenario replay with metrics.
//! - [`ckat`]: the data discovery service, building collaborative knowledge
//!   graphs, training TransR + attention-propagation embeddings, and emitting
//!   top-K recommendations with evaluation and study harnesses.
//!
//! Everything is deterministic given explicit seeds; simulations are
//! single-threaded, and independent scenario runs can execute in parallel.

pub mod cachenet;
pub mod ckat;
pub mod delivery;
pub mod error;
pub mod netsim;
pub mod workload;

pub use error::{Error, Result};
