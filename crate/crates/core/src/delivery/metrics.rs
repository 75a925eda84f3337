//! Per-scenario counters and latency summaries.

use serde::{Deserialize, Serialize};

use crate::cachenet::Tier;

/// Counters recorded while replaying one scenario.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub mode: String,
    pub seed: u64,
    pub requests: u64,
    /// Requests by worst tier touched: [local, group, peer, origin].
    pub tier_requests: [u64; 4],
    /// Segment bytes by serving tier.
    pub tier_bytes: [u64; 4],
    /// Per-request latency, completion minus arrival, seconds.
    pub latencies: Vec<f64>,
    /// Fetch/push flows sourced at an origin facility.
    pub origin_requests: u64,
    /// Bytes of those flows.
    pub origin_bytes: u64,
    /// Sum over flows of size times hop count.
    pub wan_link_bytes: u64,
    /// Pre-fetched or pushed bytes whose pin expired without a single hit.
    pub wasted_prefetch_bytes: u64,
    /// All bytes moved by pre-fetch tasks and streaming pushes.
    pub prefetch_bytes: u64,
}

impl Metrics {
    pub fn record_tier_request(&mut self, tier: Tier) {
        self.requests += 1;
        self.tier_requests[tier_index(tier)] += 1;
    }

    pub fn record_tier_bytes(&mut self, tier: Tier, bytes: u64) {
        self.tier_bytes[tier_index(tier)] += bytes;
    }

    pub fn tier_fraction(&self, tier: Tier) -> f64 {
        if self.requests == 0 {
            return 0.0;
        }
        self.tier_requests[tier_index(tier)] as f64 / self.requests as f64
    }

    pub fn local_fraction(&self) -> f64 {
        self.tier_fraction(Tier::Local)
    }

    pub fn mean_latency(&self) -> f64 {
        if self.latencies.is_empty() {
            return 0.0;
        }
        self.latencies.iter().sum::<f64>() / self.latencies.len() as f64
    }

    pub fn percentile_latency(&self, p: f64) -> f64 {
        if self.latencies.is_empty() {
            return 0.0;
        }
        let mut v = self.latencies.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
        v[rank - 1]
    }

    pub fn median_latency(&self) -> f64 {
        self.percentile_latency(0.5)
    }

    /// One flat row for `metrics.csv`.
    pub fn row(&self) -> MetricsRow {
        MetricsRow {
            mode: self.mode.clone(),
            seed: self.seed,
            requests: self.requests,
            frac_local: self.tier_fraction(Tier::Local),
            frac_group: self.tier_fraction(Tier::Group),
            frac_peer: self.tier_fraction(Tier::Peer),
            frac_origin: self.tier_fraction(Tier::Origin),
            mean_latency_s: self.mean_latency(),
            median_latency_s: self.median_latency(),
            p95_latency_s: self.percentile_latency(0.95),
            origin_requests: self.origin_requests,
            wan_bytes: self.wan_link_bytes,
            wasted_prefetch_bytes: self.wasted_prefetch_bytes,
        }
    }
}

pub fn tier_index(tier: Tier) -> usize {
    match tier {
        Tier::Local => 0,
        Tier::Group => 1,
        Tier::Peer => 2,
        Tier::Origin => 3,
    }
}

/// The column set exported per scenario run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mode: String,
    pub seed: u64,
    pub requests: u64,
    pub frac_local: f64,
    pub frac_group: f64,
    pub frac_peer: f64,
    pub frac_origin: f64,
    pub mean_latency_s: f64,
    pub median_latency_s: f64,
    pub p95_latency_s: f64,
    pub origin_requests: u64,
    pub wan_bytes: u64,
    pub wasted_prefetch_bytes: u64,
}

impl MetricsRow {
    pub const HEADER: &'static str = "mode,seed,requests,frac_local,frac_group,frac_peer,frac_origin,mean_latency_s,median_latency_s,p95_latency_s,origin_requests,wan_bytes,wasted_prefetch_bytes";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.seed,
            self.requests,
            self.frac_local,
            self.frac_group,
            self.frac_peer,
            self.frac_origin,
            self.mean_latency_s,
            self.median_latency_s,
            self.p95_latency_s,
            self.origin_requests,
            self.wan_bytes,
            self.wasted_prefetch_bytes
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<MetricsRow> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return None;
        }
        Some(MetricsRow {
            mode: f[0].to_string(),
            seed: f[1].parse().ok()?,
            requests: f[2].parse().ok()?,
            frac_local: f[3].parse().ok()?,
            frac_group: f[4].parse().ok()?,
            frac_peer: f[5].parse().ok()?,
            frac_origin: f[6].parse().ok()?,
            mean_latency_s: f[7].parse().ok()?,
            median_latency_s: f[8].parse().ok()?,
            p95_latency_s: f[9].parse().ok()?,
            origin_requests: f[10].parse().ok()?,
            wan_bytes: f[11].parse().ok()?,
            wasted_prefetch_bytes: f[12].parse().ok()?,
        })
    }
}
