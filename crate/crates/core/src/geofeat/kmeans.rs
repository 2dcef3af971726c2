//! Lloyd's k-means with k-means++ seeding, and cluster-count selection by a
//! spherical Gaussian BIC.

use std::f64::consts::PI;

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::DEFAULT_VARIANCE_FLOOR;
use super::GeoError;
use crate::seed::rng_for;

fn sq_dist(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Picks `k` initial centers: the first uniformly, the rest with probability
/// proportional to squared distance from the nearest chosen center.
pub fn plus_plus_seeds<R: Rng>(points: ArrayView2<f64>, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.nrows();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points.row(rng.random_range(0..n)).to_vec());
    let mut nearest: Vec<f64> = points
        .axis_iter(Axis(0))
        .map(|x| sq_dist(x, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (slot, x) in nearest.iter_mut().zip(points.axis_iter(Axis(0))) {
            *slot = slot.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest_centroid(x: ArrayView1<f64>, centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
}

impl KMeansFit {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

const MAX_LLOYD_ITER: usize = 300;

pub fn fit_kmeans<R: Rng>(points: ArrayView2<f64>, k: usize, rng: &mut R) -> KMeansFit {
    let (n, d) = points.dim();
    assert!(n >= 1 && k >= 1);
    let mut centroids = plus_plus_seeds(points, k, rng);
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITER {
        let mut changed = false;
        for (a, x) in assignments.iter_mut().zip(points.axis_iter(Axis(0))) {
            let c = nearest_centroid(x, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (&a, x) in assignments.iter().zip(points.axis_iter(Axis(0))) {
            counts[a] += 1;
            for (s, &xi) in sums[a].iter_mut().zip(x) {
                *s += xi;
            }
        }
        for ((c, s), &m) in centroids.iter_mut().zip(sums).zip(&counts) {
            if m > 0 {
                *c = s.into_iter().map(|v| v / m as f64).collect();
            }
        }
    }
    let inertia = assignments
        .iter()
        .zip(points.axis_iter(Axis(0)))
        .map(|(&a, x)| sq_dist(x, &centroids[a]))
        .sum();
    KMeansFit {
        centroids,
        assignments,
        inertia,
    }
}

/// BIC of a k-means partition read as a mixture of spherical Gaussians that
/// share one variance (the maximum-likelihood value, floored).
pub fn spherical_bic(sizes: &[usize], inertia: f64, dim: usize, variance_floor: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let nd = nf * dim as f64;
    let var = (inertia / nd).max(variance_floor);
    let mixing: f64 = sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| s as f64 * (s as f64 / nf).ln())
        .sum();
    let log_likelihood = mixing - 0.5 * nd * (2.0 * PI * var).ln() - inertia / (2.0 * var);
    let m = sizes.len();
    let params = (m - 1) + m * dim + 1;
    -2.0 * log_likelihood + params as f64 * nf.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub m_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub variance_floor: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            m_max: 20,
            restarts: 5,
            seed: 0,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansSelection {
    pub fit: KMeansFit,
    pub bic: f64,
    /// `(m, bic)` for each candidate count.
    pub candidates: Vec<(usize, f64)>,
}

/// Clusters stationary points, choosing the count in 1..=m_max (capped at
/// the point count) with the lowest spherical BIC.
pub fn select_kmeans(points: ArrayView2<f64>, config: &KMeansConfig) -> Result<KMeansSelection, GeoError> {
    let (n, d) = points.dim();
    if n == 0 {
        return Err(GeoError::NoData("no stationary points to cluster".into()));
    }
    if config.m_max == 0 || config.restarts == 0 {
        return Err(GeoError::Config("m_max and restarts must be positive".into()));
    }
    let fits: Vec<KMeansFit> = (1..=config.m_max.min(n))
        .into_par_iter()
        .map(|m| {
            (0..config.restarts)
                .map(|r| fit_kmeans(points, m, &mut rng_for(config.seed, (m as u64) << 16 | r as u64)))
                .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
                .expect("at least one restart")
        })
        .collect();
    let candidates: Vec<(usize, f64)> = fits
        .iter()
        .map(|f| {
            (
                f.centroids.len(),
                spherical_bic(&f.cluster_sizes(), f.inertia, d, config.variance_floor),
            )
        })
        .collect();
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.1 < candidates[best].1 {
            best = i;
        }
    }
    Ok(KMeansSelection {
        bic: candidates[best].1,
        fit: fits.into_iter().nth(best).expect("index in range"),
        candidates,
    })
}
