//! Sign-flip permutation test for a positive mean, and the five-number
//! summaries used for box plots.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
/// Largest sample that is enumerated exhaustively.
pub const DEFAULT_EXACT_LIMIT: usize = 20;
const CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("permutation test needs at least 2 values, got {0}")]
    TooFew(usize),
    #[error("values must be finite")]
    NonFinite,
    #[error("n_perm must be positive")]
    NoPermutations,
    #[error("summary of an empty sample")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestMethod {
    Exact,
    MonteCarlo { n_perm: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    pub observed_mean: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub n_perm: usize,
    pub exact_limit: usize,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            n_perm: DEFAULT_PERMUTATIONS,
            exact_limit: DEFAULT_EXACT_LIMIT,
            seed: 0,
        }
    }
}

/// One-sided test of `mean(lifts) > 0` with the default exact limit.
pub fn permutation_test_mean_gt_zero(lifts: &[f64], n_perm: usize, seed: u64) -> Result<TestResult, StatsError> {
    permutation_test(
        lifts,
        &PermutationConfig {
            n_perm,
            seed,
            ..Default::default()
        },
    )
}

/// Under the null each lift is equally likely to carry either sign. The
/// p-value is the share of sign assignments whose mean is at least the
/// observed mean, so ties count against rejection. Samples no larger than
/// `exact_limit` are enumerated; larger ones use `n_perm` random flips
/// and `p = (1 + hits) / (n_perm + 1)`.
pub fn permutation_test(lifts: &[f64], cfg: &PermutationConfig) -> Result<TestResult, StatsError> {
    let n = lifts.len();
    if n < 2 {
        return Err(StatsError::TooFew(n));
    }
    if lifts.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let observed: f64 = lifts.iter().sum();
    // Sums are compared rather than means; the slack absorbs rounding in
    // differently ordered additions without being scale dependent.
    let slack = 1e-12 * lifts.iter().map(|v| v.abs()).sum::<f64>();
    let threshold = observed - slack;
    let observed_mean = observed / n as f64;

    if n <= cfg.exact_limit {
        let hits = exact_hits(lifts, threshold);
        return Ok(TestResult {
            n,
            observed_mean,
            p_value: hits as f64 / 2f64.powi(n as i32),
            method: TestMethod::Exact,
            seed: cfg.seed,
        });
    }
    if cfg.n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let chunks = cfg.n_perm.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let draws = CHUNK.min(cfg.n_perm - c * CHUNK);
            let mut rng = rng_for(cfg.seed, c as u64);
            let mut hits = 0u64;
            for _ in 0..draws {
                let mut sum = 0.0;
                let mut bits = 0u64;
                for (i, &v) in lifts.iter().enumerate() {
                    if i % 64 == 0 {
                        bits = rng.next_u64();
                    }
                    sum += if bits & 1 == 1 { v } else { -v };
                    bits >>= 1;
                }
                if sum >= threshold {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(TestResult {
        n,
        observed_mean,
        p_value: (1 + hits) as f64 / (cfg.n_perm + 1) as f64,
        method: TestMethod::MonteCarlo { n_perm: cfg.n_perm },
        seed: cfg.seed,
    })
}

/// Signed subset sums of `values`; entry `m` gives bit i of `m` a plus sign.
fn signed_sums(values: &[f64]) -> Vec<f64> {
    (0..1usize << values.len())
        .map(|m| {
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| if m >> i & 1 == 1 { v } else { -v })
                .sum()
        })
        .collect()
}

/// Counts sign assignments with sum >= `threshold`, splitting the sample in
/// two halves so each total is a single addition of two partial sums.
fn exact_hits(values: &[f64], threshold: f64) -> u64 {
    let (a, b) = values.split_at(values.len() / 2);
    let left = signed_sums(a);
    let mut right = signed_sums(b);
    right.sort_by(f64::total_cmp);
    left.iter()
        .map(|&l| {
            let first = right.partition_point(|&r| l + r < threshold);
            (right.len() - first) as u64
        })
        .sum()
}

/// Box-plot statistics: 5th and 95th percentiles, quartiles and the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub p5: f64,
    pub q1: f64,
    pub mean: f64,
    pub q3: f64,
    pub p95: f64,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn distribution_summary(values: &[f64]) -> Result<DistributionSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    // Rounding can push the mean of a constant vector off the constant.
    let mean = mean.clamp(sorted[0], sorted[sorted.len() - 1]);
    Ok(DistributionSummary {
        p5: quantile_sorted(&sorted, 0.05),
        q1: quantile_sorted(&sorted, 0.25),
        mean,
        q3: quantile_sorted(&sorted, 0.75),
        p95: quantile_sorted(&sorted, 0.95),
    })
}
