//! Byte-budgeted LRU store with pinning.
//!
//! Entries pinned until a deadline are never evicted before it; eviction
//! walks entries from least to most recently used and skips pinned ones.
//! Every mutation reports exactly what happened, so runs can be compared
//! against a reference implementation event by event.

use std::collections::{BTreeMap, HashMap};

use super::segment::SegmentKey;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LruOutcome {
    Hit,
    Miss,
    /// Inserted; lists evicted keys in eviction order.
    Inserted(Vec<SegmentKey>),
    Pinned,
    Unpinned,
}

#[derive(Debug, Clone)]
struct Entry {
    size: u64,
    recency: u64,
    pinned_until: Option<f64>,
}

/// LRU cache keyed by segment, budgeted in bytes.
#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: u64,
    used: u64,
    tick: u64,
    entries: HashMap<SegmentKey, Entry>,
    by_recency: BTreeMap<u64, SegmentKey>,
}

impl LruCache {
    pub fn new(capacity: u64) -> Self {
        LruCache {
            capacity,
            used: 0,
            tick: 0,
            entries: HashMap::new(),
            by_recency: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used_bytes(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &SegmentKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn entry_size(&self, key: &SegmentKey) -> Option<u64> {
        self.entries.get(key).map(|e| e.size)
    }

    fn touch(&mut self, key: SegmentKey) {
        let tick = self.tick;
        self.tick += 1;
        if let Some(e) = self.entries.get_mut(&key) {
            self.by_recency.remove(&e.recency);
            e.recency = tick;
            self.by_recency.insert(tick, key);
        }
    }

    /// Looks a key up; a hit refreshes recency.
    pub fn get(&mut self, key: &SegmentKey) -> LruOutcome {
        if self.entries.contains_key(key) {
            self.touch(*key);
            LruOutcome::Hit
        } else {
            LruOutcome::Miss
        }
    }

    /// Inserts a key, evicting least-recently-used unpinned entries until it
    /// fits. Rejects entries larger than the whole budget, or blocked by pins.
    pub fn put(
        &mut self,
        key: SegmentKey,
        size: u64,
        now: f64,
        pinned_until: Option<f64>,
    ) -> Result<LruOutcome> {
        if size > self.capacity {
            return Err(Error::Cache(format!(
                "entry of {size} bytes exceeds capacity {}",
                self.capacity
            )));
        }
        if let Some(e) = self.entries.get_mut(&key) {
            // re-insert of an existing key refreshes recency and may extend a pin
            if let Some(p) = pinned_until {
                e.pinned_until = Some(e.pinned_until.map_or(p, |old| old.max(p)));
            }
            self.touch(key);
            return Ok(LruOutcome::Inserted(Vec::new()));
        }

        let mut evicted = Vec::new();
        if self.used + size > self.capacity {
            let mut freed = 0u64;
            let need = self.used + size - self.capacity;
            let mut victims = Vec::new();
            for (&recency, &candidate) in &self.by_recency {
                if freed >= need {
                    break;
                }
                let e = &self.entries[&candidate];
                let pinned = e.pinned_until.map(|p| p > now).unwrap_or(false);
                if pinned {
                    continue;
                }
                freed += e.size;
                victims.push((recency, candidate));
            }
            if freed < need {
                return Err(Error::Cache(format!(
                    "cannot free {need} bytes: pinned entries block eviction"
                )));
            }
            for (recency, victim) in victims {
                let e = self.entries.remove(&victim).expect("victim exists");
                self.by_recency.remove(&recency);
                self.used -= e.size;
                evicted.push(victim);
            }
        }

        let tick = self.tick;
        self.tick += 1;
        self.entries.insert(
            key,
            Entry {
                size,
                recency: tick,
                pinned_until,
            },
        );
        self.by_recency.insert(tick, key);
        self.used += size;
        Ok(LruOutcome::Inserted(evicted))
    }

    /// Extends (or sets) the pin on an existing entry.
    pub fn pin(&mut self, key: &SegmentKey, until: f64) -> Result<LruOutcome> {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.pinned_until = Some(e.pinned_until.map_or(until, |old| old.max(until)));
                Ok(LruOutcome::Pinned)
            }
            None => Err(Error::Cache(format!("pin of absent key {key:?}"))),
        }
    }

    pub fn unpin(&mut self, key: &SegmentKey) -> Result<LruOutcome> {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.pinned_until = None;
                Ok(LruOutcome::Unpinned)
            }
            None => Err(Error::Cache(format!("unpin of absent key {key:?}"))),
        }
    }

    /// Drops a key outright (used when invalidating bookkeeping, not by LRU policy).
    pub fn remove(&mut self, key: &SegmentKey) -> bool {
        if let Some(e) = self.entries.remove(key) {
            self.by_recency.remove(&e.recency);
            self.used -= e.size;
            true
        } else {
            false
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &SegmentKey> {
        self.entries.keys()
    }
}
