//! Shared test oracles, independent of the library's implementation paths.

#![allow(dead_code)]

use std::collections::HashMap;

/// A flow request for the reference integrator: (start time, size bytes).
#[derive(Debug, Clone, Copy)]
pub struct OracleFlow {
    pub start: f64,
    pub size: f64,
}

/// Reference single-link fair-share integrator.
///
/// Steps time forward in small increments; within a step rates are constant,
/// and completions inside a step are solved linearly, so results are exact
/// for piecewise-constant rates regardless of the step size. Returns delivery
/// times (transmission end + latency) per flow.
pub fn integrate_single_link(
    flows: &[OracleFlow],
    bandwidth: f64,
    latency: f64,
    dt: f64,
) -> Vec<f64> {
    let n = flows.len();
    let mut bytes = vec![0.0f64; n];
    let mut done: Vec<Option<f64>> = vec![None; n];
    let mut t = 0.0f64;
    let t_end_guard = 1e12;
    while done.iter().any(|d| d.is_none()) {
        assert!(t < t_end_guard, "integrator ran away");
        let active: Vec<usize> = (0..n)
            .filter(|&i| done[i].is_none() && flows[i].start <= t + 1e-15)
            .collect();
        // next flow start bounds the step
        let next_start = flows
            .iter()
            .enumerate()
            .filter(|(i, f)| done[*i].is_none() && f.start > t + 1e-15)
            .map(|(_, f)| f.start)
            .fold(f64::INFINITY, f64::min);
        if active.is_empty() {
            t = next_start;
            continue;
        }
        let rate = bandwidth / active.len() as f64;
        let mut step = dt.min(next_start - t);
        // earliest completion within the step?
        let mut completer: Option<(usize, f64)> = None;
        for &i in &active {
            let need = (flows[i].size - bytes[i]) / rate;
            if need <= step {
                match completer {
                    Some((_, best)) if best <= need => {}
                    _ => completer = Some((i, need)),
                }
            }
        }
        if let Some((i, need)) = completer {
            step = need;
            for &j in &active {
                bytes[j] += rate * step;
            }
            t += step;
            done[i] = Some(t + latency);
            continue;
        }
        for &j in &active {
            bytes[j] += rate * step;
        }
        t += step;
    }
    done.into_iter().map(|d| d.unwrap()).collect()
}

/// Naive LRU reference: an explicit recency list scanned linearly.
pub struct NaiveLru {
    capacity: u64,
    used: u64,
    /// Most recent last: (key, size, pinned_until)
    entries: Vec<(u64, u64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NaiveOutcome {
    Hit,
    Miss,
    Inserted(Vec<u64>),
    Rejected,
    Pinned,
    PinError,
    Unpinned,
}

impl NaiveLru {
    pub fn new(capacity: u64) -> Self {
        NaiveLru {
            capacity,
            used: 0,
            entries: Vec::new(),
        }
    }

    pub fn used_bytes(&self) -> u64 {
        self.used
    }

    pub fn get(&mut self, key: u64) -> NaiveOutcome {
        if let Some(pos) = self.entries.iter().position(|e| e.0 == key) {
            let e = self.entries.remove(pos);
            self.entries.push(e);
            NaiveOutcome::Hit
        } else {
            NaiveOutcome::Miss
        }
    }

    pub fn put(&mut self, key: u64, size: u64, now: f64, pin: Option<f64>) -> NaiveOutcome {
        if size > self.capacity {
            return NaiveOutcome::Rejected;
        }
        if let Some(pos) = self.entries.iter().position(|e| e.0 == key) {
            let mut e = self.entries.remove(pos);
            if let Some(p) = pin {
                e.2 = Some(e.2.map_or(p, |old: f64| old.max(p)));
            }
            self.entries.push(e);
            return NaiveOutcome::Inserted(Vec::new());
        }
        // can enough unpinned bytes be freed?
        let freeable: u64 = self
            .entries
            .iter()
            .filter(|e| e.2.map(|p| p <= now).unwrap_or(true))
            .map(|e| e.1)
            .sum();
        if self.used + size > self.capacity && freeable < self.used + size - self.capacity {
            return NaiveOutcome::Rejected;
        }
        let mut evicted = Vec::new();
        while self.used + size > self.capacity {
            let pos = self
                .entries
                .iter()
                .position(|e| e.2.map(|p| p <= now).unwrap_or(true))
                .expect("freeable checked");
            let e = self.entries.remove(pos);
            self.used -= e.1;
            evicted.push(e.0);
        }
        self.entries.push((key, size, pin));
        self.used += size;
        NaiveOutcome::Inserted(evicted)
    }

    pub fn pin(&mut self, key: u64, until: f64) -> NaiveOutcome {
        match self.entries.iter_mut().find(|e| e.0 == key) {
            Some(e) => {
                e.2 = Some(e.2.map_or(until, |old: f64| old.max(until)));
                NaiveOutcome::Pinned
            }
            None => NaiveOutcome::PinError,
        }
    }

    pub fn unpin(&mut self, key: u64) -> NaiveOutcome {
        match self.entries.iter_mut().find(|e| e.0 == key) {
            Some(e) => {
                e.2 = None;
                NaiveOutcome::Unpinned
            }
            None => NaiveOutcome::PinError,
        }
    }
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut row: HashMap<usize, u64> = HashMap::new();
    let mut col: HashMap<usize, u64> = HashMap::new();
    for i in 0..n {
        *table.entry((a[i], b[i])).or_insert(0) += 1;
        *row.entry(a[i]).or_insert(0) += 1;
        *col.entry(b[i]).or_insert(0) += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_table: f64 = table.values().map(|&v| c2(v)).sum();
    let sum_row: f64 = row.values().map(|&v| c2(v)).sum();
    let sum_col: f64 = col.values().map(|&v| c2(v)).sum();
    let total = c2(n as u64);
    let expected = sum_row * sum_col / total;
    let max = 0.5 * (sum_row + sum_col);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_table - expected) / (max - expected)
}

/// Popularity recommender: items ranked by global interaction count, ties by
/// canonical item id; seen items excluded per user.
pub fn popularity_topk(
    train: &[(String, String)],
    user: &str,
    k: usize,
) -> Vec<String> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut seen: std::collections::HashSet<&str> = Default::default();
    for (u, i) in train {
        *counts.entry(i.as_str()).or_insert(0) += 1;
        if u == user {
            seen.insert(i.as_str());
        }
    }
    let mut items: Vec<(&str, u64)> = counts.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    items
        .into_iter()
        .filter(|(i, _)| !seen.contains(i))
        .take(k)
        .map(|(i, _)| i.to_string())
        .collect()
}
