//! The distributed cache layer: segment keys, per-DTN LRU stores, virtual
//! groups via k-means, and the cache lookup chain.

mod groups;
mod kmeans;
mod lru;
mod network;
mod segment;

pub use groups::{
    assign_group_dtn, build_placement, kmeans_users, user_features, Placement, PlacementConfig,
    VirtualGroup,
};
pub use kmeans::{kmeans, KmeansResult};
pub use lru::{LruCache, LruOutcome};
pub use network::{CacheNetwork, ChainScope, Located, Tier};
pub use segment::{segment_size, segments_for, segments_for_window, SegmentKey};
