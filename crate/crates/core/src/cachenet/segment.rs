//! Segment keys: the cache and transfer unit.
//!
//! Each object's timeline is cut into fixed-duration chunks; a request window
//! maps to every chunk it intersects, and partial overlap fetches the whole
//! chunk.

use serde::{Deserialize, Serialize};

use crate::workload::{Catalog, ObjectId, Request};
use crate::{Error, Result};

/// One chunk of one object: `[index * C, (index + 1) * C)` seconds of data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentKey {
    pub object: ObjectId,
    pub chunk: u32,
}

/// Bytes held by one chunk of `object`.
pub fn segment_size(catalog: &Catalog, object: ObjectId, chunk_duration_s: u64) -> u64 {
    catalog.object(object).rate_bytes_per_s * chunk_duration_s
}

/// All chunks intersecting `[start, end)`, in ascending chunk order.
pub fn segments_for(
    request: &Request,
    catalog: &Catalog,
    chunk_duration_s: u64,
) -> Result<Vec<SegmentKey>> {
    if request.object.0 as usize >= catalog.objects.len() {
        return Err(Error::UnknownObject(format!("#{}", request.object.0)));
    }
    let (start, end) = request.window;
    if start < 0 {
        return Err(Error::validation(format!(
            "window start {start} is before the timeline origin"
        )));
    }
    if end <= start {
        return Err(Error::validation(format!("window [{start}, {end}) is empty")));
    }
    let c = chunk_duration_s as i64;
    let first = start / c;
    let last = (end - 1) / c;
    Ok((first..=last)
        .map(|i| SegmentKey {
            object: request.object,
            chunk: i as u32,
        })
        .collect())
}

/// Chunks intersecting an arbitrary window; used for predicted windows.
pub fn segments_for_window(
    object: ObjectId,
    window: (i64, i64),
    chunk_duration_s: u64,
) -> Vec<SegmentKey> {
    let c = chunk_duration_s as i64;
    let (start, end) = window;
    if end <= start {
        return Vec::new();
    }
    let first = (start.max(0)) / c;
    let last = (end - 1) / c;
    if last < first {
        return Vec::new();
    }
    (first..=last)
        .map(|i| SegmentKey {
            object,
            chunk: i as u32,
        })
        .collect()
}
