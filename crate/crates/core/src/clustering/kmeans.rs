//! k-means with k-means++ seeding, Lloyd iterations and best-of-restarts
//! selection; silhouette-based choice of k.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dist, quantile, sq_dist};
use crate::par;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    /// Training-distance quantile used as the flag cutoff.
    pub threshold: f64,
}

impl KMeansModel {
    /// Euclidean distance to the nearest centroid.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.centroids.iter().map(|c| sq_dist(c, x)).fold(f64::INFINITY, f64::min).sqrt()
    }

    pub fn is_anomaly(&self, x: &[f64]) -> bool {
        self.score(x) > self.threshold
    }
}

pub fn kmeans_score(model: &KMeansModel, x: &[f64]) -> f64 {
    model.score(x)
}

#[derive(Debug, Clone)]
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
}

impl LloydRun {
    pub fn wcss(&self) -> f64 {
        *self.wcss_trace.last().unwrap_or(&0.0)
    }
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd iterations from the given centroids until assignments repeat or
/// `max_iter` steps.
pub fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = centroids.len();
    let dim = rows[0].len();
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let assigned: Vec<(usize, f64)> = rows.iter().map(|x| nearest(&centroids, x)).collect();
        let next: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        trace.push(assigned.iter().map(|a| a.1).sum());
        if next == labels || iterations >= max_iter {
            labels = next;
            break;
        }
        labels = next;
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut taken = vec![false; rows.len()];
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // re-seed to the point farthest from its own centroid
                let far = (0..rows.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(b.cmp(&a)));
                if let Some(i) = far {
                    taken[i] = true;
                    centroids[j] = rows[i].clone();
                }
            }
        }
    }
    LloydRun {
        centroids,
        labels,
        wcss_trace: trace,
        iterations,
    }
}

/// k-means++ seeding.
pub fn kmeans_plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, x) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(x, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Best of `restarts` seeded runs by within-cluster sum of squares.
pub fn kmeans_best(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<LloydRun> {
    if k == 0 || k > rows.len() {
        return Err(Error::invalid(format!("k = {k} must lie in [1, {}]", rows.len())));
    }
    let runs = par::map_range(restarts.max(1), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let init = kmeans_plus_plus(rows, k, &mut rng);
        lloyd(rows, init, MAX_ITERATIONS)
    });
    let mut best = None::<LloydRun>;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.wcss() < b.wcss()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans_fit(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansModel> {
    kmeans_fit_with(rows, k, seed, restarts, 0.99)
}

/// As [`kmeans_fit`] with a chosen training-distance quantile as cutoff.
pub fn kmeans_fit_with(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize, q: f64) -> Result<KMeansModel> {
    let run = kmeans_best(rows, k, seed, restarts)?;
    let d: Vec<f64> = rows
        .iter()
        .zip(&run.labels)
        .map(|(x, &l)| dist(x, &run.centroids[l]))
        .collect();
    Ok(KMeansModel {
        threshold: quantile(&d, q),
        centroids: run.centroids,
        k,
    })
}

/// Mean silhouette coefficient; singletons contribute 0.
pub fn silhouette(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = rows.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let s = par::map_range(n, |i| {
        if sizes[labels[i]] <= 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(&rows[i], &rows[j]);
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            return 0.0;
        }
        let m = a.max(b);
        if m > 0.0 {
            (b - a) / m
        } else {
            0.0
        }
    });
    s.iter().sum::<f64>() / n as f64
}

/// k in `ks` with the highest silhouette (smaller k on ties), evaluated on
/// an evenly strided subsample of at most `sample` rows.
pub fn select_k(rows: &[Vec<f64>], ks: std::ops::RangeInclusive<usize>, seed: u64, restarts: usize, sample: usize) -> Result<usize> {
    let stride = rows.len().div_ceil(sample.max(2)).max(1);
    let sub: Vec<Vec<f64>> = rows.iter().step_by(stride).cloned().collect();
    let mut best = None::<(usize, f64)>;
    for k in ks {
        if k < 2 || k > sub.len() {
            continue;
        }
        let run = kmeans_best(&sub, k, seed, restarts)?;
        let s = silhouette(&sub, &run.labels);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((k, s));
        }
    }
    Ok(best.map_or(1, |b| b.0))
}
