//! Next-request prediction and pre-fetch scheduling.

use crate::workload::{AccessPattern, ObjectId, PatternKind, Request, UserId};

/// A predicted future request derived from one classified history.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedRequest {
    pub user: UserId,
    pub object: ObjectId,
    pub predicted_t: f64,
    pub window: (i64, i64),
    pub kind: PatternKind,
    pub history_len: usize,
}

/// Predicts the next request from a classified history.
///
/// Regular continues the window tiling back to back; overlapping continues it
/// shifted left by the median overlap. Real-time users are served by
/// streaming subscriptions instead, and unknown histories yield nothing.
pub fn predict_next(pattern: &AccessPattern, history: &[Request]) -> Option<PredictedRequest> {
    let last = history.last()?;
    match pattern.kind {
        PatternKind::Regular | PatternKind::Overlapping => {
            let overlap = if pattern.kind == PatternKind::Regular {
                0.0
            } else {
                pattern.overlap_s
            };
            let w_end = last.window.1 as f64;
            let start = (w_end - overlap).round() as i64;
            let end = start + pattern.window_s.round() as i64;
            if end <= start {
                return None;
            }
            Some(PredictedRequest {
                user: last.user,
                object: last.object,
                predicted_t: last.t_arrive as f64 + pattern.period_s,
                window: (start, end),
                kind: pattern.kind,
                history_len: history.len(),
            })
        }
        PatternKind::RealTime | PatternKind::Unknown => None,
    }
}

/// When to issue a pre-fetch and how long to pin it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefetchPlan {
    pub issue_t: f64,
    pub pin_until: f64,
}

/// Computes the issue time for a predicted request.
///
/// The lead is `lead_factor` times the estimated transfer time from the
/// cheapest current holder, plus half the spread of the observed
/// inter-arrival gaps so jittered arrivals do not beat the transfer. Issue
/// times in the past clamp to `now`. Segments stay pinned until one period
/// past the predicted arrival.
pub fn schedule_prefetch(
    pred: &PredictedRequest,
    est_transfer_s: f64,
    gap_spread_s: f64,
    lead_factor: f64,
    period_s: f64,
    now: f64,
) -> PrefetchPlan {
    let lead = lead_factor * est_transfer_s + 0.5 * gap_spread_s.max(0.0);
    PrefetchPlan {
        issue_t: (pred.predicted_t - lead).max(now),
        pin_until: pred.predicted_t + period_s,
    }
}

/// Max minus min of consecutive arrival gaps; zero for metronome histories.
pub fn gap_spread(history: &[Request]) -> f64 {
    if history.len() < 3 {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in history.windows(2) {
        let gap = w[1].t_arrive as f64 - w[0].t_arrive as f64;
        lo = lo.min(gap);
        hi = hi.max(gap);
    }
    (hi - lo).max(0.0)
}
