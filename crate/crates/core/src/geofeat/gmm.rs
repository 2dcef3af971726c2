//! Diagonal-covariance Gaussian mixtures fit by expectation-maximization,
//! with the component count chosen by the Bayesian information criterion.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::plus_plus_seeds;
use super::GeoError;
use crate::seed::rng_for;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Relative change in log-likelihood below which EM stops.
    pub tolerance: f64,
    pub max_iter: usize,
    pub variance_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iter: 200,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub em: EmConfig,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k_max: 20,
            restarts: 5,
            seed: 0,
            em: EmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Per-component terms that do not depend on the point.
struct Precomputed {
    offsets: Vec<f64>,
    precisions: Vec<Vec<f64>>,
}

impl Precomputed {
    fn new(model: &GaussianMixture) -> Self {
        let offsets = model
            .weights
            .iter()
            .zip(&model.variances)
            .map(|(w, var)| w.ln() - 0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>())
            .collect();
        let precisions = model
            .variances
            .iter()
            .map(|var| var.iter().map(|v| 1.0 / v).collect())
            .collect();
        Self { offsets, precisions }
    }

    fn joint_log_densities(&self, model: &GaussianMixture, x: ArrayView1<f64>, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            let mut quad = 0.0;
            for ((&xi, &mu), &prec) in x.iter().zip(&model.means[k]).zip(&self.precisions[k]) {
                let diff = xi - mu;
                quad += diff * diff * prec;
            }
            *slot = self.offsets[k] - 0.5 * quad;
        }
    }
}

impl GaussianMixture {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Free parameters: `K - 1` weights plus a mean and a variance per
    /// component and dimension.
    pub fn param_count(&self) -> usize {
        let (k, d) = (self.n_components(), self.dim());
        k - 1 + 2 * k * d
    }

    /// `ln(w_k) + ln N(x | mu_k, diag(var_k))` for every component.
    pub fn joint_log_densities(&self, x: ArrayView1<f64>, out: &mut [f64]) {
        Precomputed::new(self).joint_log_densities(self, x, out);
    }

    pub fn log_density(&self, x: ArrayView1<f64>) -> f64 {
        let mut buf = vec![0.0; self.n_components()];
        self.joint_log_densities(x, &mut buf);
        log_sum_exp(&buf)
    }

    pub fn log_likelihood(&self, points: ArrayView2<f64>) -> f64 {
        let pre = Precomputed::new(self);
        let mut buf = vec![0.0; self.n_components()];
        points
            .axis_iter(Axis(0))
            .map(|x| {
                pre.joint_log_densities(self, x, &mut buf);
                log_sum_exp(&buf)
            })
            .sum()
    }

    /// Component with the highest posterior; ties go to the lower index.
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let mut buf = vec![0.0; self.n_components()];
        self.joint_log_densities(x, &mut buf);
        argmax(&buf)
    }

    pub fn bic(&self, points: ArrayView2<f64>) -> f64 {
        bic(self.log_likelihood(points), self.param_count(), points.nrows())
    }

    pub fn aic(&self, points: ArrayView2<f64>) -> f64 {
        aic(self.log_likelihood(points), self.param_count())
    }
}

pub fn bic(log_likelihood: f64, params: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + params as f64 * (n as f64).ln()
}

pub fn aic(log_likelihood: f64, params: usize) -> f64 {
    2.0 * params as f64 - 2.0 * log_likelihood
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Result of one EM run.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: GaussianMixture,
    pub log_likelihood: f64,
    /// Log-likelihood after initialization and after every M-step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn floored_variance(points: ArrayView2<f64>, floor: f64) -> Vec<f64> {
    points
        .var_axis(Axis(0), 0.0)
        .iter()
        .map(|&v| v.max(floor))
        .collect()
}

/// Runs EM for a fixed component count from a k-means++ style start.
pub fn fit_em<R: Rng>(points: ArrayView2<f64>, k: usize, rng: &mut R, config: &EmConfig) -> EmFit {
    let (n, d) = points.dim();
    assert!(n >= 1 && k >= 1, "EM needs at least one point and one component");
    let start_var = floored_variance(points, config.variance_floor);
    let mut model = GaussianMixture {
        weights: vec![1.0 / k as f64; k],
        means: plus_plus_seeds(points, k, rng),
        variances: vec![start_var; k],
    };

    let mut resp = Array2::<f64>::zeros((n, k));
    let mut ll = e_step(&model, points, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 0..config.max_iter {
        m_step(&mut model, points, &resp, config.variance_floor, d);
        let next = e_step(&model, points, &mut resp);
        trace.push(next);
        let change = (next - ll).abs();
        ll = next;
        if change <= config.tolerance * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    EmFit {
        model,
        log_likelihood: ll,
        trace,
        converged,
    }
}

/// Fills responsibilities and returns the log-likelihood of the current model.
fn e_step(model: &GaussianMixture, points: ArrayView2<f64>, resp: &mut Array2<f64>) -> f64 {
    let k = model.n_components();
    let pre = Precomputed::new(model);
    let mut buf = vec![0.0; k];
    let mut total = 0.0;
    for (x, mut row) in points.axis_iter(Axis(0)).zip(resp.axis_iter_mut(Axis(0))) {
        pre.joint_log_densities(model, x, &mut buf);
        let lse = log_sum_exp(&buf);
        total += lse;
        for (r, &b) in row.iter_mut().zip(&buf) {
            *r = (b - lse).exp();
        }
    }
    total
}

fn m_step(
    model: &mut GaussianMixture,
    points: ArrayView2<f64>,
    resp: &Array2<f64>,
    floor: f64,
    d: usize,
) {
    let n = points.nrows() as f64;
    for k in 0..model.n_components() {
        let col = resp.column(k);
        let nk: f64 = col.sum();
        model.weights[k] = nk / n;
        if nk <= f64::MIN_POSITIVE {
            // Empty component: parameters are irrelevant to the likelihood.
            continue;
        }
        let mut mean = vec![0.0; d];
        for (x, &r) in points.axis_iter(Axis(0)).zip(col) {
            for (m, &xi) in mean.iter_mut().zip(x) {
                *m += r * xi;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut var = vec![0.0; d];
        for (x, &r) in points.axis_iter(Axis(0)).zip(col) {
            for ((v, &xi), &m) in var.iter_mut().zip(x).zip(&mean) {
                *v += r * (xi - m) * (xi - m);
            }
        }
        var.iter_mut().for_each(|v| *v = (*v / nk).max(floor));
        model.means[k] = mean;
        model.variances[k] = var;
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub k: usize,
    pub log_likelihood: f64,
    pub bic: f64,
}

#[derive(Debug, Clone)]
pub struct GmmSelection {
    pub model: GaussianMixture,
    pub log_likelihood: f64,
    pub bic: f64,
    /// Best restart for each candidate component count, in increasing `k`.
    pub candidates: Vec<CandidateScore>,
}

/// Whether every component carries at least `d + 1` points of
/// responsibility. A component fit to a single sample sits at the variance
/// floor and its likelihood spike outweighs the BIC penalty, so such fits
/// are not allowed to compete. Identical repeated samples still form a
/// supported component.
fn supported(model: &GaussianMixture, n: usize) -> bool {
    let need = (model.dim() + 1) as f64;
    model.n_components() == 1 || model.weights.iter().all(|w| w * n as f64 >= need - 1e-9)
}

/// Fits mixtures with 1..=k_max components (capped at the point count) and
/// keeps the one with the lowest BIC. Each count gets `restarts` EM runs and
/// keeps the best likelihood among runs whose components are all
/// supported (see [`supported`]); a count with no such run is skipped.
/// Ties in BIC go to the smaller model.
pub fn fit_gmm_bic(points: ArrayView2<f64>, config: &GmmConfig) -> Result<GmmSelection, GeoError> {
    let n = points.nrows();
    if n == 0 {
        return Err(GeoError::NoData("mixture fit needs at least one point".into()));
    }
    if config.k_max == 0 || config.restarts == 0 {
        return Err(GeoError::Config("k_max and restarts must be positive".into()));
    }
    let k_max = config.k_max.min(n);
    let fits: Vec<EmFit> = (1..=k_max)
        .into_par_iter()
        .filter_map(|k| {
            (0..config.restarts)
                .map(|r| {
                    let mut rng = rng_for(config.seed, (k as u64) << 16 | r as u64);
                    fit_em(points, k, &mut rng, &config.em)
                })
                .filter(|f| supported(&f.model, n))
                .reduce(|best, fit| {
                    if fit.log_likelihood > best.log_likelihood {
                        fit
                    } else {
                        best
                    }
                })
        })
        .collect();

    let candidates: Vec<CandidateScore> = fits
        .iter()
        .map(|f| CandidateScore {
            k: f.model.n_components(),
            log_likelihood: f.log_likelihood,
            bic: bic(f.log_likelihood, f.model.param_count(), n),
        })
        .collect();
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.bic < candidates[best].bic {
            best = i;
        }
    }
    let chosen = fits.into_iter().nth(best).expect("index in range");
    Ok(GmmSelection {
        bic: candidates[best].bic,
        log_likelihood: chosen.log_likelihood,
        model: chosen.model,
        candidates,
    })
}
