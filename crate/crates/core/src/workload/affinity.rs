//! Affinity statistics over a request trace: how concentrated each user's
//! queries are on one region and one data kind, and how much of each user's
//! object footprint is shared with org mates.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::types::{Catalog, ObjectId, Request, UserId};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserAffinity {
    pub user_id: String,
    pub requests: u64,
    /// Fraction of the user's queries that target the modal region.
    pub modal_region_share: f64,
    /// Fraction of the user's queries that target the modal data kind.
    pub modal_kind_share: f64,
    /// Fraction of the user's distinct objects also queried by an org mate.
    pub intra_org_overlap: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AffinityReport {
    pub per_user: Vec<UserAffinity>,
    /// Means over users with at least one request.
    pub aggregate_modal_region_share: f64,
    pub aggregate_modal_kind_share: f64,
    pub aggregate_intra_org_overlap: f64,
}

fn modal_share(counts: &HashMap<&str, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    max as f64 / total as f64
}

/// Computes per-user and aggregate affinity fractions.
///
/// All fractions lie in `[0, 1]` and are invariant under any permutation of
/// the trace rows. An empty trace yields an empty report.
pub fn affinity_stats(trace: &[Request], catalog: &Catalog) -> Result<AffinityReport> {
    for r in trace {
        if r.object.0 as usize >= catalog.objects.len() {
            return Err(Error::UnknownObject(format!("#{}", r.object.0)));
        }
        if r.user.0 as usize >= catalog.users.len() {
            return Err(Error::UnknownUser(format!("#{}", r.user.0)));
        }
    }
    if trace.is_empty() {
        return Ok(AffinityReport::default());
    }

    let mut region_counts: BTreeMap<UserId, HashMap<&str, u64>> = BTreeMap::new();
    let mut kind_counts: BTreeMap<UserId, HashMap<&str, u64>> = BTreeMap::new();
    let mut footprints: BTreeMap<UserId, HashSet<ObjectId>> = BTreeMap::new();
    for r in trace {
        let obj = catalog.object(r.object);
        *region_counts
            .entry(r.user)
            .or_default()
            .entry(obj.region_id.as_str())
            .or_insert(0) += 1;
        *kind_counts
            .entry(r.user)
            .or_default()
            .entry(obj.data_kind.as_str())
            .or_insert(0) += 1;
        footprints.entry(r.user).or_default().insert(r.object);
    }

    // union of org-mate footprints per org, excluding the user themself
    let mut org_members: HashMap<&str, Vec<UserId>> = HashMap::new();
    for &user in footprints.keys() {
        org_members
            .entry(catalog.user(user).org_id.as_str())
            .or_default()
            .push(user);
    }

    let mut per_user = Vec::new();
    for (&user, regions) in &region_counts {
        let footprint = &footprints[&user];
        let org = catalog.user(user).org_id.as_str();
        let mut shared = 0usize;
        if footprint.is_empty() {
            shared = 0;
        } else {
            let mates: Vec<&HashSet<ObjectId>> = org_members[org]
                .iter()
                .filter(|&&m| m != user)
                .map(|m| &footprints[m])
                .collect();
            for obj in footprint {
                if mates.iter().any(|f| f.contains(obj)) {
                    shared += 1;
                }
            }
        }
        let requests: u64 = regions.values().sum();
        per_user.push(UserAffinity {
            user_id: catalog.user(user).user_id.clone(),
            requests,
            modal_region_share: modal_share(regions),
            modal_kind_share: modal_share(&kind_counts[&user]),
            intra_org_overlap: if footprint.is_empty() {
                0.0
            } else {
                shared as f64 / footprint.len() as f64
            },
        });
    }

    let n = per_user.len() as f64;
    let report = AffinityReport {
        aggregate_modal_region_share: per_user.iter().map(|u| u.modal_region_share).sum::<f64>() / n,
        aggregate_modal_kind_share: per_user.iter().map(|u| u.modal_kind_share).sum::<f64>() / n,
        aggregate_intra_org_overlap: per_user.iter().map(|u| u.intra_org_overlap).sum::<f64>() / n,
        per_user,
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::types::{Channel, DataObject, UserProfile};

    fn catalog_two_regions() -> Catalog {
        let mk = |id: &str, region: &str, kind: &str| DataObject {
            object_id: id.into(),
            instrument_id: format!("i-{region}"),
            region_id: region.into(),
            data_kind: kind.into(),
            rate_bytes_per_s: 10,
        };
        Catalog::new(
            vec![
                mk("a1", "ra", "ctd"),
                mk("a2", "ra", "adcp"),
                mk("b1", "rb", "ctd"),
            ],
            vec![
                UserProfile {
                    user_id: "u1".into(),
                    org_id: "o1".into(),
                    coord: (0.0, 0.0),
                    home_dtn: "dtn1".into(),
                },
                UserProfile {
                    user_id: "u2".into(),
                    org_id: "o1".into(),
                    coord: (0.0, 0.0),
                    home_dtn: "dtn1".into(),
                },
            ],
            vec![],
        )
        .unwrap()
    }

    fn req(id: u32, user: u32, object: u32) -> Request {
        Request {
            req_id: format!("r{id}"),
            t_arrive: id as u64,
            user: UserId(user),
            object: ObjectId(object),
            window: (0, 10),
            channel: Channel::Api,
        }
    }

    #[test]
    fn single_object_user_has_share_one() {
        let catalog = catalog_two_regions();
        let trace = vec![req(0, 0, 0), req(1, 0, 0), req(2, 0, 0)];
        let rep = affinity_stats(&trace, &catalog).unwrap();
        assert_eq!(rep.per_user[0].modal_region_share, 1.0);
        assert_eq!(rep.per_user[0].modal_kind_share, 1.0);
    }

    #[test]
    fn three_to_one_region_split_gives_three_quarters() {
        let catalog = catalog_two_regions();
        let trace = vec![req(0, 0, 0), req(1, 0, 1), req(2, 0, 0), req(3, 0, 2)];
        let rep = affinity_stats(&trace, &catalog).unwrap();
        assert_eq!(rep.per_user[0].modal_region_share, 0.75);
    }

    #[test]
    fn empty_trace_empty_report() {
        let catalog = catalog_two_regions();
        let rep = affinity_stats(&[], &catalog).unwrap();
        assert!(rep.per_user.is_empty());
        assert_eq!(rep.aggregate_modal_region_share, 0.0);
    }

    #[test]
    fn permutation_invariant_and_bounded() {
        let catalog = catalog_two_regions();
        let mut trace = vec![
            req(0, 0, 0),
            req(1, 0, 2),
            req(2, 1, 0),
            req(3, 1, 1),
            req(4, 0, 1),
        ];
        let a = affinity_stats(&trace, &catalog).unwrap();
        trace.reverse();
        trace.swap(0, 2);
        let b = affinity_stats(&trace, &catalog).unwrap();
        assert_eq!(
            a.aggregate_modal_region_share,
            b.aggregate_modal_region_share
        );
        assert_eq!(a.aggregate_intra_org_overlap, b.aggregate_intra_org_overlap);
        for u in &a.per_user {
            for v in [u.modal_region_share, u.modal_kind_share, u.intra_org_overlap] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn org_overlap_counts_shared_objects() {
        let catalog = catalog_two_regions();
        // u1 touches {a1, a2}, u2 touches {a1}: u2's footprint is fully shared,
        // u1's is half shared.
        let trace = vec![req(0, 0, 0), req(1, 0, 1), req(2, 1, 0)];
        let rep = affinity_stats(&trace, &catalog).unwrap();
        let u1 = rep.per_user.iter().find(|u| u.user_id == "u1").unwrap();
        let u2 = rep.per_user.iter().find(|u| u.user_id == "u2").unwrap();
        assert_eq!(u1.intra_org_overlap, 0.5);
        assert_eq!(u2.intra_org_overlap, 1.0);
    }
}
