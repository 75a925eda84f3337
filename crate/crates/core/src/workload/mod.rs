//! Catalog ingestion, trace generation, access-pattern classification, and
//! affinity statistics.

mod affinity;
pub mod catalog;
mod classify;
mod generate;
mod types;

pub use affinity::{affinity_stats, AffinityReport, UserAffinity};
pub use catalog::{load_catalog, load_trace, write_trace};
pub use classify::{classify_user_pattern, median, ClassifierConfig};
pub use generate::{generate, GeneratedWorkload, GeneratorParams, GroundTruth, UserTruth};
pub use types::{
    AccessPattern, Catalog, Channel, DataObject, DerivationRecipe, ObjectId, PatternKind, Request,
    UserId, UserProfile,
};

/// Groups a trace's requests per user, preserving arrival order.
pub fn histories_by_user(trace: &[Request]) -> std::collections::BTreeMap<UserId, Vec<&Request>> {
    let mut map: std::collections::BTreeMap<UserId, Vec<&Request>> = Default::default();
    for r in trace {
        map.entry(r.user).or_default().push(r);
    }
    map
}
