use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LearnError, LearnerConfig, LearnerKind};
use crate::diagnostics::Diagnostics;
use crate::eval::{compute_metric, Metric};
use crate::seed::rng_for;

/// `count` values spaced evenly in log10 between `lo` and `hi` inclusive.
fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Default search space for a learner family.
pub fn default_grid(kind: LearnerKind) -> Vec<LearnerConfig> {
    match kind {
        LearnerKind::ElasticNet => log_space(1e-4, 1e1, 7)
            .into_iter()
            .flat_map(|a| [0.1, 0.5, 0.9, 1.0].map(|rho| LearnerConfig::elastic_net(a, rho)))
            .collect(),
        LearnerKind::Lasso => log_space(1e-4, 1e1, 7).into_iter().map(LearnerConfig::lasso).collect(),
        LearnerKind::LogisticL2 => log_space(1e-4, 1e2, 7).into_iter().map(LearnerConfig::logistic).collect(),
    }
}

/// Fold index for each of `n` rows: a seeded shuffle dealt round-robin
/// into `k` folds, so fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, 0xF01D));
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos % k.max(1);
    }
    folds
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub best: LearnerConfig,
    /// Mean validation error of every grid entry, in grid order.
    pub scores: Vec<(LearnerConfig, f64)>,
    pub folds: usize,
    pub diagnostics: Diagnostics,
}

fn metric_for(kind: LearnerKind) -> Metric {
    if kind.is_classifier() {
        Metric::PredictionError
    } else {
        Metric::Rmse
    }
}

fn cv_error(
    config: &LearnerConfig,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    folds: &[usize],
    k: usize,
) -> Result<f64, LearnError> {
    let metric = metric_for(config.kind);
    let mut total = 0.0;
    let mut used = 0usize;
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
        if test.is_empty() || train.len() < 2 {
            continue;
        }
        let model = config.fit_model(x.select(Axis(0), &train).view(), y.select(Axis(0), &train).view())?;
        let pred = super::Predictor::predict(&model, x.select(Axis(0), &test).view());
        let truth: Array1<f64> = y.select(Axis(0), &test);
        total += compute_metric(pred.as_slice().unwrap(), truth.as_slice().unwrap(), metric);
        used += 1;
    }
    Ok(if used == 0 { f64::INFINITY } else { total / used as f64 })
}

/// Picks the grid entry with the lowest mean k-fold validation error
/// (prediction error for classifiers, RMSE for regressors). Errors equal to
/// within 1e-12 are resolved toward the more strongly regularized entry.
/// With fewer rows than folds the fold count drops to the row count.
pub fn select_hyperparameters(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    grid: &[LearnerConfig],
    folds: usize,
    seed: u64,
) -> Result<Selection, LearnError> {
    if grid.is_empty() {
        return Err(LearnError::EmptyGrid);
    }
    for c in grid {
        c.validate()?;
    }
    let mut diagnostics = Diagnostics::new();
    if grid.len() == 1 {
        return Ok(Selection {
            best: grid[0],
            scores: vec![(grid[0], f64::NAN)],
            folds: 0,
            diagnostics,
        });
    }
    let n = y.len();
    if n < 2 {
        return Err(LearnError::TooFewRows { needed: 2, got: n });
    }
    let k = if n < folds {
        diagnostics.warn("folds_reduced", format!("rows={n} folds={folds} -> {n}"));
        n
    } else {
        folds.max(2)
    };
    let assignment = fold_assignment(n, k, seed);
    let errors: Vec<f64> = grid
        .par_iter()
        .map(|c| cv_error(c, x, y, &assignment, k))
        .collect::<Result<_, _>>()?;

    let mut best = 0;
    for i in 1..grid.len() {
        let (e, b) = (errors[i], errors[best]);
        let tie = (e - b).abs() <= 1e-12 * (1.0 + b.abs());
        if (!tie && e < b) || (tie && grid[i].shrinkage_key() > grid[best].shrinkage_key()) {
            best = i;
        }
    }
    Ok(Selection {
        best: grid[best],
        scores: grid.iter().copied().zip(errors).collect(),
        folds: k,
        diagnostics,
    })
}
