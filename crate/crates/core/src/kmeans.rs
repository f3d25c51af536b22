//! Seeded Lloyd K-means with k-means++ initialization and restarts.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::squared_distance;

pub const MAX_ITERATIONS: usize = 300;
pub const RELATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Row-major `k × dim` centroids.
    pub centers: Vec<f64>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub replicate: usize,
}

/// Runs `replicates` independent K-means fits on row-major `data` and keeps
/// the one with the lowest inertia (earliest replicate on ties).
///
/// Per-replicate seeds are drawn up front from `seed`, so the outcome does not
/// depend on how the replicates are scheduled.
pub fn kmeans(data: &[f64], dim: usize, k: usize, replicates: usize, seed: u64) -> Result<KMeansResult> {
    if dim == 0 || data.len() % dim != 0 || data.is_empty() {
        return Err(Error::InvalidInput("k-means input must be a non-empty row-major matrix".into()));
    }
    let n = data.len() / dim;
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k-means needs 1 <= k={k} <= n={n}")));
    }
    if replicates == 0 {
        return Err(Error::InvalidInput("k-means needs at least one replicate".into()));
    }
    let mut stream = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..replicates).map(|_| stream.next_u64()).collect();

    let runs: Vec<KMeansResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut fit = lloyd(data, dim, k, plus_plus(data, dim, k, &mut rng));
            fit.replicate = r;
            fit
        })
        .collect();
    Ok(runs
        .into_iter()
        .min_by(|a, b| a.inertia.total_cmp(&b.inertia).then(a.replicate.cmp(&b.replicate)))
        .expect("at least one replicate"))
}

fn row(data: &[f64], dim: usize, i: usize) -> &[f64] {
    &data[i * dim..(i + 1) * dim]
}

fn plus_plus(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(row(data, dim, first));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| squared_distance(row(data, dim, i), row(data, dim, first)))
        .collect();
    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(data, dim, pick).to_vec();
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(squared_distance(row(data, dim, i), &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

fn assign(data: &[f64], dim: usize, centers: &[f64], labels: &mut [usize], dists: &mut [f64]) {
    for (i, x) in data.chunks_exact(dim).enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.chunks_exact(dim).enumerate() {
            let d = squared_distance(x, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dists[i] = best_d;
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(data: &[f64], dim: usize, k: usize, centers: &mut [f64], labels: &mut [usize], dists: &mut [f64]) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far = None;
        for (i, &d) in dists.iter().enumerate() {
            if counts[labels[i]] > 1 && far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let Some((p, _)) = far else { break };
        counts[labels[p]] -= 1;
        counts[c] = 1;
        labels[p] = c;
        dists[p] = 0.0;
        centers[c * dim..(c + 1) * dim].copy_from_slice(row(data, dim, p));
    }
}

fn update_centers(data: &[f64], dim: usize, k: usize, labels: &[usize], centers: &mut [f64]) {
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &l) in data.chunks_exact(dim).zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for a in 0..dim {
                centers[c * dim + a] = sums[c * dim + a] / counts[c] as f64;
            }
        }
    }
}

fn inertia(data: &[f64], dim: usize, centers: &[f64], labels: &[usize]) -> f64 {
    data.chunks_exact(dim)
        .zip(labels)
        .map(|(x, &l)| squared_distance(x, &centers[l * dim..(l + 1) * dim]))
        .sum()
}

fn lloyd(data: &[f64], dim: usize, k: usize, mut centers: Vec<f64>) -> KMeansResult {
    let n = data.len() / dim;
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut previous = f64::INFINITY;
    let mut current = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        assign(data, dim, &centers, &mut labels, &mut dists);
        repair_empty(data, dim, k, &mut centers, &mut labels, &mut dists);
        update_centers(data, dim, k, &labels, &mut centers);
        current = inertia(data, dim, &centers, &labels);
        if current == 0.0 || (previous - current).abs() <= RELATIVE_TOL * previous {
            break;
        }
        previous = current;
    }
    KMeansResult {
        labels,
        centers,
        inertia: current,
        replicate: 0,
    }
}
