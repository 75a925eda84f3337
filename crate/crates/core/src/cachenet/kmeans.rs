//! Lloyd's k-means with deterministic k-means++ seeding.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_per_iter: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn kmeanspp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            // all remaining points coincide with a centroid
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Clusters `points` into `k` groups.
///
/// Iterates until the assignment is stable or `max_iter` passes; an empty
/// cluster is re-seeded with the point farthest from its current centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KmeansResult> {
    if k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    if k > points.len() {
        return Err(Error::config(format!(
            "k = {k} exceeds the number of points {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::config("inconsistent feature dimensions"));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_init(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; points.len()];
    let mut wcss_per_iter = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;

        let mut changed = false;
        let mut wcss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            wcss += d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        wcss_per_iter.push(wcss);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // farthest point from its own centroid becomes the new seed
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("points is non-empty");
                centroids[c] = points[far].clone();
            } else {
                for (s, out) in sums[c].iter().zip(centroids[c].iter_mut()) {
                    *out = s / counts[c] as f64;
                }
            }
        }
    }

    Ok(KmeansResult {
        assignments,
        centroids,
        wcss_per_iter,
        iterations,
    })
}
