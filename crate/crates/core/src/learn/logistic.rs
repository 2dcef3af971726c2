//! L2-penalized logistic regression.
//!
//! Parameters are packed as `[b, w_1, .., w_d]` over standardized features;
//! the objective is the mean log-loss plus `lambda/2 ||w||^2` with the
//! intercept unpenalized. Minimized by Newton steps with backtracking.

use ndarray::{ArrayView1, ArrayView2, Axis};

use super::linalg::cholesky_solve;
use super::{check_inputs, FittedModel, LearnError, LearnerKind, Standardization};

const GRADIENT_TOLERANCE: f64 = 1e-6;
const MAX_NEWTON_STEPS: usize = 100;

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn linear(z: ArrayView1<f64>, params: &[f64]) -> f64 {
    params[0] + z.iter().zip(&params[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Mean log-loss plus the ridge penalty, for standardized design `z`.
pub fn logistic_objective(z: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, params: &[f64]) -> f64 {
    let n = z.nrows() as f64;
    let loss: f64 = z
        .axis_iter(Axis(0))
        .zip(y)
        .map(|(row, &yi)| {
            let t = linear(row, params);
            softplus(t) - yi * t
        })
        .sum();
    let ridge: f64 = params[1..].iter().map(|w| w * w).sum();
    loss / n + 0.5 * lambda * ridge
}

pub fn logistic_gradient(z: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, params: &[f64]) -> Vec<f64> {
    let n = z.nrows() as f64;
    let mut g = vec![0.0; params.len()];
    for (row, &yi) in z.axis_iter(Axis(0)).zip(y) {
        let e = sigmoid(linear(row, params)) - yi;
        g[0] += e;
        for (gj, &zj) in g[1..].iter_mut().zip(row) {
            *gj += e * zj;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    for (gj, &wj) in g[1..].iter_mut().zip(&params[1..]) {
        *gj += lambda * wj;
    }
    g
}

fn hessian(z: ArrayView2<f64>, lambda: f64, params: &[f64]) -> Vec<f64> {
    let m = params.len();
    let n = z.nrows() as f64;
    let mut h = vec![0.0; m * m];
    let mut aug = vec![1.0; m];
    for row in z.axis_iter(Axis(0)) {
        let p = sigmoid(linear(row, params));
        let s = p * (1.0 - p);
        aug[1..].iter_mut().zip(row).for_each(|(a, &v)| *a = v);
        for i in 0..m {
            for j in 0..=i {
                h[i * m + j] += s * aug[i] * aug[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..=i {
            h[i * m + j] /= n;
            h[j * m + i] = h[i * m + j];
        }
        if i > 0 {
            h[i * m + i] += lambda;
        }
    }
    h
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits the model; targets must be 0 or 1. Training data holding a single
/// class yields a degenerate model that always predicts that class.
pub fn fit_logistic_l2(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<FittedModel, LearnError> {
    check_inputs(x, y, 1)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(LearnError::InvalidConfig(format!("lambda={lambda}")));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(LearnError::NonBinaryTarget);
    }
    let standardization = Standardization::fit(x);
    let d = x.ncols();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Ok(FittedModel {
            kind: LearnerKind::LogisticL2,
            weights: vec![0.0; d],
            intercept: if ones == 0 { f64::NEG_INFINITY } else { f64::INFINITY },
            standardization,
            degenerate: true,
            iterations: 0,
        });
    }

    let z = standardization.transform(x);
    let rate = ones as f64 / y.len() as f64;
    let mut params = vec![0.0; d + 1];
    params[0] = (rate / (1.0 - rate)).ln();
    let mut obj = logistic_objective(z.view(), y, lambda, &params);
    let mut steps = 0;
    while steps < MAX_NEWTON_STEPS {
        let g = logistic_gradient(z.view(), y, lambda, &params);
        if norm(&g) < GRADIENT_TOLERANCE {
            break;
        }
        steps += 1;
        let mut h = hessian(z.view(), lambda, &params);
        let m = params.len();
        let mut ridge = 0.0;
        let dir = loop {
            if let Some(sol) = cholesky_solve(&h, &g) {
                break sol;
            }
            ridge = if ridge == 0.0 { 1e-10 } else { ridge * 10.0 };
            for i in 0..m {
                h[i * m + i] += ridge;
            }
            if ridge > 1e6 {
                break g.clone();
            }
        };
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, s)| p - t * s).collect();
            let trial_obj = logistic_objective(z.view(), y, lambda, &trial);
            if trial_obj <= obj - 1e-4 * t * slope {
                params = trial;
                obj = trial_obj;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(FittedModel {
        kind: LearnerKind::LogisticL2,
        weights: params[1..].to_vec(),
        intercept: params[0],
        standardization,
        degenerate: false,
        iterations: steps,
    })
}
