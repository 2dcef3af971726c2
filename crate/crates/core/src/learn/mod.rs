//! Reference learners: elastic net / lasso regression by coordinate descent,
//! L2-penalized logistic regression by damped Newton, and k-fold
//! hyperparameter selection.
//!
//! Every learner standardizes features with training statistics and leaves
//! the intercept unpenalized. Anything implementing [`Learner`] can be
//! evaluated by the harness in [`crate::eval`].

mod elastic_net;
mod linalg;
mod logistic;
mod select;
mod standardize;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use elastic_net::{elastic_net_objective, fit_elastic_net, fit_elastic_net_traced, soft_threshold};
pub use logistic::{fit_logistic_l2, logistic_gradient, logistic_objective};
pub use select::{default_grid, fold_assignment, select_hyperparameters, Selection};
pub use standardize::Standardization;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("design has {rows} rows but target has {targets}")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("logistic targets must be 0 or 1")]
    NonBinaryTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    ElasticNet,
    Lasso,
    LogisticL2,
}

impl LearnerKind {
    pub fn is_classifier(self) -> bool {
        self == LearnerKind::LogisticL2
    }
}

/// One point in a learner's hyperparameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Penalty magnitude for elastic net and lasso.
    pub alpha: f64,
    /// L1 share of the elastic net penalty; lasso is `rho = 1`.
    pub rho: f64,
    /// L2 strength for logistic regression.
    pub lambda: f64,
}

impl LearnerConfig {
    pub fn elastic_net(alpha: f64, rho: f64) -> Self {
        Self {
            kind: LearnerKind::ElasticNet,
            alpha,
            rho,
            lambda: 0.0,
        }
    }

    pub fn lasso(alpha: f64) -> Self {
        Self {
            kind: LearnerKind::Lasso,
            alpha,
            rho: 1.0,
            lambda: 0.0,
        }
    }

    pub fn logistic(lambda: f64) -> Self {
        Self {
            kind: LearnerKind::LogisticL2,
            alpha: 0.0,
            rho: 0.0,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.to_string()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be a finite value >= 0");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite value >= 0");
        }
        if self.kind == LearnerKind::Lasso && self.rho != 1.0 {
            return bad("lasso requires rho = 1");
        }
        Ok(())
    }

    /// Orders configurations by how strongly they shrink: the penalty
    /// magnitude first, then the L1 share.
    pub fn shrinkage_key(&self) -> (f64, f64) {
        match self.kind {
            LearnerKind::LogisticL2 => (self.lambda, 0.0),
            _ => (self.alpha, self.rho),
        }
    }
}

/// A trained model that maps feature rows to predictions.
pub trait Predictor: Send + Sync {
    /// Regression: predicted level. Classification: predicted class as 0 or 1.
    fn predict(&self, x: ArrayView2<f64>) -> Array1<f64>;
}

/// Something that can be trained on a design matrix and target vector.
pub trait Learner: Send + Sync {
    fn fit(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Box<dyn Predictor>, LearnError>;
}

/// Weights live in standardized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: LearnerKind,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub standardization: Standardization,
    /// Set when training data held a single class; the model then predicts
    /// that class with probability one.
    pub degenerate: bool,
    pub iterations: usize,
}

impl FittedModel {
    /// Linear predictor `b + w . z` for each row.
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.axis_iter(Axis(0))
            .map(|row| {
                let z = self.standardization.transform_row(row);
                self.intercept + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Probability of class 1 (logistic models only).
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.decision_function(x).mapv(logistic::sigmoid)
    }

    /// Intercept and weights expressed on the original feature scale.
    pub fn raw_coefficients(&self) -> (f64, Vec<f64>) {
        let s = &self.standardization;
        let weights: Vec<f64> = self.weights.iter().zip(&s.scales).map(|(w, sc)| w / sc).collect();
        let intercept = self.intercept - weights.iter().zip(&s.means).map(|(w, m)| w * m).sum::<f64>();
        (intercept, weights)
    }
}

impl Predictor for FittedModel {
    fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        if self.kind.is_classifier() {
            self.predict_proba(x).mapv(|p| if p >= 0.5 { 1.0 } else { 0.0 })
        } else {
            self.decision_function(x)
        }
    }
}

impl LearnerConfig {
    pub fn fit_model(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<FittedModel, LearnError> {
        self.validate()?;
        match self.kind {
            LearnerKind::ElasticNet | LearnerKind::Lasso => fit_elastic_net(x, y, self.alpha, self.rho),
            LearnerKind::LogisticL2 => fit_logistic_l2(x, y, self.lambda),
        }
    }
}

impl Learner for LearnerConfig {
    fn fit(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Box<dyn Predictor>, LearnError> {
        Ok(Box::new(self.fit_model(x, y)?))
    }
}

/// Ignores the features and predicts the training mean (regression) or the
/// training mode with ties going to class 1 (classification).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantLearner {
    pub classify: bool,
}

struct ConstantPredictor(f64);

impl Predictor for ConstantPredictor {
    fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        Array1::from_elem(x.nrows(), self.0)
    }
}

impl Learner for ConstantLearner {
    fn fit(&self, _x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Box<dyn Predictor>, LearnError> {
        if y.is_empty() {
            return Err(LearnError::TooFewRows { needed: 1, got: 0 });
        }
        let value = if self.classify {
            let ones = y.iter().filter(|&&v| v == 1.0).count();
            if 2 * ones >= y.len() {
                1.0
            } else {
                0.0
            }
        } else {
            y.mean().unwrap_or(0.0)
        };
        Ok(Box::new(ConstantPredictor(value)))
    }
}

pub(crate) fn check_inputs(x: ArrayView2<f64>, y: ArrayView1<f64>, min_rows: usize) -> Result<(), LearnError> {
    if x.nrows() != y.len() {
        return Err(LearnError::ShapeMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    if x.nrows() < min_rows {
        return Err(LearnError::TooFewRows {
            needed: min_rows,
            got: x.nrows(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    Ok(())
}
