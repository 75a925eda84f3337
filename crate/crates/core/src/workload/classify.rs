//! Per-user access-pattern classification.
//!
//! A history is classified from three medians: inter-arrival time, window
//! length, and overlap between consecutive windows of the same object.
//! Periodicity is decided by the coefficient of variation of inter-arrivals;
//! among periodic users, high frequency means real-time, a positive window
//! overlap means overlapping, and everything else is regular. Real-time is
//! checked before overlapping: a high-frequency monitor may overlap its own
//! windows, and frequency is the distinguishing trait.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::types::{AccessPattern, PatternKind, Request};

/// Thresholds for [`classify_user_pattern`]. All values are decisions, not
/// facts measured from production traces; they are configurable everywhere.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Maximum coefficient of variation of inter-arrivals to call a history periodic.
    pub cv_max: f64,
    /// Period at or below which a periodic history counts as real-time, seconds.
    pub realtime_threshold_s: f64,
    /// Minimum number of requests before classifying at all.
    pub min_history: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            cv_max: 0.2,
            realtime_threshold_s: 300.0,
            min_history: 3,
        }
    }
}

/// Median of a slice; the slice is copied and sorted. Even lengths average
/// the two central elements.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Classifies a single user's request history, sorted by arrival time.
///
/// Total over valid histories: inputs shorter than `min_history` yield
/// `Unknown`, never an error.
pub fn classify_user_pattern(history: &[Request], cfg: &ClassifierConfig) -> AccessPattern {
    if history.len() < cfg.min_history {
        return AccessPattern::unknown();
    }

    let gaps: Vec<f64> = history
        .windows(2)
        .map(|w| w[1].t_arrive as f64 - w[0].t_arrive as f64)
        .collect();
    let period = median(&gaps);

    let lens: Vec<f64> = history.iter().map(|r| r.window_len() as f64).collect();
    let window = median(&lens);

    // Overlap is defined between consecutive windows of the same object.
    let mut last_end: HashMap<crate::workload::ObjectId, i64> = HashMap::new();
    let mut overlaps = Vec::new();
    for r in history {
        if let Some(prev_end) = last_end.get(&r.object) {
            overlaps.push((prev_end - r.window.0).max(0) as f64);
        }
        last_end.insert(r.object, r.window.1);
    }
    let overlap = median(&overlaps);

    let est = |kind| AccessPattern {
        kind,
        period_s: period,
        window_s: window,
        overlap_s: overlap,
    };

    if period <= 0.0 {
        return est(PatternKind::Unknown);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / gaps.len() as f64;
    let cv = var.sqrt() / mean;
    if cv > cfg.cv_max {
        return est(PatternKind::Unknown);
    }

    if period <= cfg.realtime_threshold_s {
        est(PatternKind::RealTime)
    } else if overlap > 0.0 {
        AccessPattern {
            kind: PatternKind::Overlapping,
            period_s: period,
            window_s: window,
            overlap_s: overlap,
        }
    } else {
        est(PatternKind::Regular)
    }
}
