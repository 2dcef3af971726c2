//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use userlift::seed::rng_for;

/// Smallest circle containing every point, by trying every circle through
/// two or three of them.
pub fn brute_force_circle(pts: &[[f64; 2]]) -> ([f64; 2], f64) {
    let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    if pts.len() == 1 {
        return (pts[0], 0.0);
    }
    let covers = |c: [f64; 2], r: f64| pts.iter().all(|&p| d(p, c) <= r * (1.0 + 1e-12) + 1e-12);
    let mut best = ([0.0, 0.0], f64::INFINITY);
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            let c = [(pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0];
            let r = d(pts[i], pts[j]) / 2.0;
            if r < best.1 && covers(c, r) {
                best = (c, r);
            }
            for k in j + 1..n {
                let (a, b, cc) = (pts[i], pts[j], pts[k]);
                let den = 2.0 * (a[0] * (b[1] - cc[1]) + b[0] * (cc[1] - a[1]) + cc[0] * (a[1] - b[1]));
                if den.abs() < 1e-14 {
                    continue;
                }
                let sq = |p: [f64; 2]| p[0] * p[0] + p[1] * p[1];
                let ux = (sq(a) * (b[1] - cc[1]) + sq(b) * (cc[1] - a[1]) + sq(cc) * (a[1] - b[1])) / den;
                let uy = (sq(a) * (cc[0] - b[0]) + sq(b) * (a[0] - cc[0]) + sq(cc) * (b[0] - a[0])) / den;
                let c = [ux, uy];
                let r = d(a, c).max(d(b, c)).max(d(cc, c));
                if r < best.1 && covers(c, r) {
                    best = (c, r);
                }
            }
        }
    }
    best
}

/// Lowest within-cluster sum of squares over every assignment of the
/// points to exactly `k` non-empty clusters.
pub fn exhaustive_kmeans_inertia(points: &Array2<f64>, k: usize) -> f64 {
    let n = points.nrows();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        if sizes.iter().all(|&s| s > 0) {
            let mut inertia = 0.0;
            for c in 0..k {
                let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                for j in 0..points.ncols() {
                    let m = rows.iter().map(|&i| points[[i, j]]).sum::<f64>() / rows.len() as f64;
                    inertia += rows.iter().map(|&i| (points[[i, j]] - m).powi(2)).sum::<f64>();
                }
            }
            best = best.min(inertia);
        }
        // Next assignment in base k.
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// Ordinary least squares with an intercept through the normal equations.
/// Returns `(intercept, weights)`.
pub fn ols(x: &Array2<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let (n, d) = x.dim();
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let b = DVector::from_column_slice(y);
    let beta = (a.transpose() * &a).cholesky().expect("full rank").solve(&(a.transpose() * b));
    (beta[0], beta.iter().skip(1).copied().collect())
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|j| {
            let mut up = at.to_vec();
            let mut down = at.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

pub fn normal_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_for(seed, 0);
    Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
}

/// Two tight 2-D blobs ten units apart.
pub fn two_blobs(seed: u64, per: usize) -> Array2<f64> {
    let mut rng = rng_for(seed, 1);
    Array2::from_shape_fn((2 * per, 2), |(i, _)| {
        let offset = if i < per { 0.0 } else { 10.0 };
        offset + 0.5 * rng.sample::<f64, _>(StandardNormal)
    })
}

pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
        .collect()
}

/// Columns of the 8x8 Sylvester Hadamard matrix other than the constant
/// one: centered, mutually orthogonal, unit population variance.
pub fn hadamard_design() -> Array2<f64> {
    let mut h = vec![vec![1.0]];
    while h.len() < 8 {
        let m = h.len();
        let mut next = vec![vec![0.0; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][j] = h[i][j];
                next[i][j + m] = h[i][j];
                next[i + m][j] = h[i][j];
                next[i + m][j + m] = -h[i][j];
            }
        }
        h = next;
    }
    Array2::from_shape_fn((8, 7), |(i, j)| h[i][j + 1])
}

/// Midnight 2020-01-01 in seconds since epoch.
pub const DAY0: i64 = 1_577_836_800;

/// Writes a geodetic location trace and a 1-5 self-report file for
/// `users` users, where user `u` has `days[u]` days of 48 half-hourly
/// samples: home at night, work from 9 to 17, jitter of a few meters.
pub fn write_trace_fixture(dir: &std::path::Path, days: &[usize], seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    use std::fmt::Write as _;
    let mut gps = String::from("user_id,timestamp,x,y\n");
    let mut labels = String::from("user_id,timestamp,value\n");
    for (u, &n_days) in days.iter().enumerate() {
        let mut rng = rng_for(seed, u as u64);
        let home = [43.70 + 0.01 * u as f64, -72.29];
        let work = [home[0] + 0.02, home[1] + 0.015];
        for day in 0..n_days as i64 {
            for slot in 0..48i64 {
                let t = DAY0 + day * 86_400 + slot * 1800;
                let hour = slot / 2;
                let base = if (9..17).contains(&hour) && day % 7 < 5 { work } else { home };
                let jitter = |r: &mut rand_chacha::ChaCha8Rng| 2e-5 * r.sample::<f64, _>(StandardNormal);
                writeln!(gps, "u{u},{t},{:.7},{:.7}", base[0] + jitter(&mut rng), base[1] + jitter(&mut rng)).unwrap();
            }
            let value = rng.random_range(1..=5);
            writeln!(labels, "u{u},{},{value}", DAY0 + day * 86_400 + 12 * 3600 + 60).unwrap();
        }
    }
    let (g, l) = (dir.join("gps.csv"), dir.join("labels.csv"));
    std::fs::write(&g, gps).unwrap();
    std::fs::write(&l, labels).unwrap();
    (g, l)
}
