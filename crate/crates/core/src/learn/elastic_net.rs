//! Elastic net by cyclic coordinate descent on standardized features.
//!
//! Minimizes
//!
//! ```text
//! (1/2n) ||y - b - Z w||^2 + alpha * (rho ||w||_1 + (1 - rho)/2 ||w||^2)
//! ```
//!
//! where `Z` holds the standardized training features. Because `Z` is
//! centered the intercept is the training mean of `y`.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};

use super::{check_inputs, FittedModel, LearnError, LearnerKind, Standardization};

const TOLERANCE: f64 = 1e-7;
const MAX_SWEEPS: usize = 10_000;

/// `sign(z) * max(|z| - gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Penalized objective for standardized design `z`, given residuals.
pub fn elastic_net_objective(residuals: ArrayView1<f64>, weights: &[f64], alpha: f64, rho: f64) -> f64 {
    let n = residuals.len() as f64;
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = weights.iter().map(|w| w * w).sum();
    residuals.dot(&residuals) / (2.0 * n) + alpha * (rho * l1 + 0.5 * (1.0 - rho) * l2)
}

pub fn fit_elastic_net(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    rho: f64,
) -> Result<FittedModel, LearnError> {
    fit_elastic_net_traced(x, y, alpha, rho).map(|(m, _)| m)
}

/// Like [`fit_elastic_net`], also returning the objective after each sweep
/// (the first entry is the objective at `w = 0`).
pub fn fit_elastic_net_traced(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    rho: f64,
) -> Result<(FittedModel, Vec<f64>), LearnError> {
    check_inputs(x, y, 2)?;
    if !(alpha >= 0.0 && alpha.is_finite()) || !(0.0..=1.0).contains(&rho) {
        return Err(LearnError::InvalidConfig(format!("alpha={alpha}, rho={rho}")));
    }
    let (n, d) = x.dim();
    let nf = n as f64;
    let standardization = Standardization::fit(x);
    let z = standardization.transform(x);
    let intercept = y.mean().expect("n >= 2");
    let col_sq: Vec<f64> = z.axis_iter(Axis(1)).map(|c| c.dot(&c) / nf).collect();

    let mut w = vec![0.0; d];
    let mut r: Array1<f64> = y.mapv(|v| v - intercept);
    let l1 = alpha * rho;
    let l2 = alpha * (1.0 - rho);
    let mut trace = vec![elastic_net_objective(r.view(), &w, alpha, rho)];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            let col = z.column(j);
            let old = w[j];
            let rho_j = col.dot(&r) / nf + col_sq[j] * old;
            let denom = col_sq[j] + l2;
            let new = if denom > 0.0 { soft_threshold(rho_j, l1) / denom } else { 0.0 };
            if new != old {
                r.scaled_add(old - new, &col);
                w[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        let obj = elastic_net_objective(r.view(), &w, alpha, rho);
        debug_assert!(
            obj <= trace.last().unwrap() + 1e-12 * (1.0 + trace.last().unwrap().abs()),
            "coordinate descent objective increased"
        );
        trace.push(obj);
        if max_change < TOLERANCE {
            break;
        }
    }
    Ok((
        FittedModel {
            kind: if rho == 1.0 { LearnerKind::Lasso } else { LearnerKind::ElasticNet },
            weights: w,
            intercept,
            standardization,
            degenerate: false,
            iterations: sweeps,
        },
        trace,
    ))
}
