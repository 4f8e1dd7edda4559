use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::DiscoverError;
use crate::rng;

const MAX_ITERATIONS: usize = 300;
/// Silhouette is evaluated on at most this many points (evenly strided).
const SILHOUETTE_SAMPLE: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective_history: Vec<f64>,
}

fn sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(centroids: &[[f64; 2]], p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, &m) in centroids.iter().enumerate() {
        let d = sq(m, p);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Clusters that lose all their
/// points keep their previous centroid.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> KMeans {
    assert!(k >= 1 && k <= points.len(), "need 1 ≤ k ≤ points");
    let mut rng = rng::chacha(seed, &[rng::stream::KMEANS, k as u64]);
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| sq(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next]);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(sq(p, points[next]));
        }
    }
    let mut assignment = vec![usize::MAX; points.len()];
    let mut objective_history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut objective = 0.0;
        for (a, &p) in assignment.iter_mut().zip(points) {
            let (c, d) = nearest(&centroids, p);
            objective += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        objective_history.push(objective);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0, 0.0, 0.0]; k];
        for (&a, p) in assignment.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            sums[a][2] += 1.0;
        }
        for (c, s) in centroids.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
    }
    KMeans {
        centroids,
        assignment,
        objective_history,
    }
}

/// Mean silhouette coefficient; points in singleton clusters score 0.
/// `None` when fewer than two clusters are non-empty.
pub fn silhouette(points: &[[f64; 2]], assignment: &[usize]) -> Option<f64> {
    let k = assignment.iter().max()? + 1;
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return None;
    }
    let stride = points.len().div_ceil(SILHOUETTE_SAMPLE).max(1);
    let sample: Vec<usize> = (0..points.len()).step_by(stride).collect();
    let per_point: Vec<f64> = sample
        .par_iter()
        .map(|&i| {
            let own = assignment[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, &p) in points.iter().enumerate() {
                sums[assignment[j]] += sq(points[i], p).sqrt();
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Some(per_point.iter().sum::<f64>() / sample.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PetalClustering {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    /// Cluster whose centroid lies nearest the origin.
    pub stamen: usize,
    pub silhouette: f64,
    /// `(k, silhouette)` for every candidate evaluated.
    pub candidates: Vec<(usize, f64)>,
    /// Set when the geometry is degenerate (e.g. all points coincide).
    pub degenerate: bool,
}

/// k-means over `k_range` (clamped to the point count), keeping the `k` with
/// the highest silhouette; ties go to the smaller `k`.
pub fn cluster_petals(
    points: &[[f64; 2]],
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<PetalClustering, DiscoverError> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 1 || lo > hi {
        return Err(DiscoverError::Params(format!("invalid k range {lo}..={hi}")));
    }
    if points.is_empty() {
        return Err(DiscoverError::TooFewRows(0));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(DiscoverError::Params("non-finite coordinates".into()));
    }
    let hi = hi.min(points.len());
    let lo = lo.min(hi);
    let runs: Vec<(usize, KMeans, Option<f64>)> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let km = kmeans(points, k, seed);
            let s = silhouette(points, &km.assignment);
            (k, km, s)
        })
        .collect();
    let candidates: Vec<(usize, f64)> = runs.iter().map(|(k, _, s)| (*k, s.unwrap_or(0.0))).collect();
    let best =
        runs.iter()
            .filter(|r| r.2.is_some())
            .fold(None::<&(usize, KMeans, Option<f64>)>, |best, r| match best {
                Some(b) if b.2 >= r.2 => Some(b),
                _ => Some(r),
            });
    let (chosen, degenerate) = match best {
        Some(r) => (r, false),
        None => {
            log::warn!("petal clustering is degenerate; using k = {lo}");
            (&runs[0], true)
        }
    };
    let (k, km, s) = chosen;
    let stamen = nearest(&km.centroids, [0.0, 0.0]).0;
    Ok(PetalClustering {
        k: *k,
        assignment: km.assignment.clone(),
        centroids: km.centroids.clone(),
        stamen,
        silhouette: s.unwrap_or(0.0),
        candidates,
        degenerate,
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}
