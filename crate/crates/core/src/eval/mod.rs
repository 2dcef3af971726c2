//! Baselines, cross-validation in population and personal scopes, error
//! metrics, user lift and variance explained.
//!
//! Prediction error is reported in percent and RMSE in label units; a user's
//! lift is expressed in the same unit as the errors it is computed from.

mod cv;
mod data;
mod metric;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::LearnError;
use crate::stats::StatsError;

pub use cv::{cross_validate, CvResult, LearnerSpec, SelectedConfig};
pub use data::{Dataset, Observation};
pub use metric::{
    compute_metric, constant_guess, mean_of, mode_of, personal_baseline, personal_baselines, population_baseline,
    user_lift, variance_explained_by_personal_baseline, Metric, UserLiftRecord,
};
pub use report::{evaluate, write_quantiles_csv, EvalOptions, EvalReport, QuantileRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("baseline and model errors cover different users")]
    UserMismatch,
    #[error("need at least 2 evaluable users, found {found}")]
    NoEligibleUsers { found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Binary,
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One model trained on every user's observations.
    Population,
    /// One model per user, trained on that user's observations only.
    Personal,
}

/// Written `loo` or `kfold:<k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CvScheme {
    Loo,
    KFold(usize),
}

impl fmt::Display for CvScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvScheme::Loo => f.write_str("loo"),
            CvScheme::KFold(k) => write!(f, "kfold:{k}"),
        }
    }
}

impl FromStr for CvScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "loo" {
            return Ok(CvScheme::Loo);
        }
        let k = s
            .strip_prefix("kfold:")
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| format!("expected `loo` or `kfold:<k>`, got `{s}`"))?;
        if k < 2 {
            return Err(format!("kfold needs k >= 2, got {k}"));
        }
        Ok(CvScheme::KFold(k))
    }
}

impl TryFrom<String> for CvScheme {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<CvScheme> for String {
    fn from(c: CvScheme) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Mode or mean over the user's entire series.
    #[default]
    FullSeries,
    /// Mode or mean refit on each training split, scored on the held-out rows.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub target: Target,
    pub metric: Metric,
    pub scope: Scope,
    pub cv: CvScheme,
    /// Rerun hyperparameter selection inside every training split instead
    /// of once per model scope.
    #[serde(default)]
    pub nested_selection: bool,
    #[serde(default)]
    pub baseline: BaselineMode,
    /// Folds used by hyperparameter selection.
    #[serde(default = "default_selection_folds")]
    pub selection_folds: usize,
    /// Personal-scope users with fewer observations are skipped.
    #[serde(default = "default_min_user_observations")]
    pub min_user_observations: usize,
}

fn default_selection_folds() -> usize {
    10
}

fn default_min_user_observations() -> usize {
    3
}

impl TaskSpec {
    /// LOO, metric matching the target, selection outside the splits.
    pub fn new(target: Target, scope: Scope) -> Self {
        Self {
            target,
            metric: Metric::for_target(target),
            scope,
            cv: CvScheme::Loo,
            nested_selection: false,
            baseline: BaselineMode::FullSeries,
            selection_folds: default_selection_folds(),
            min_user_observations: default_min_user_observations(),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.metric != Metric::for_target(self.target) {
            return Err(EvalError::InvalidTask(format!(
                "metric {:?} does not match target {:?}",
                self.metric, self.target
            )));
        }
        if let CvScheme::KFold(k) = self.cv {
            if k < 2 {
                return Err(EvalError::InvalidTask(format!("kfold needs k >= 2, got {k}")));
            }
        }
        if self.selection_folds < 2 {
            return Err(EvalError::InvalidTask("selection_folds must be >= 2".into()));
        }
        if self.min_user_observations < 2 {
            return Err(EvalError::InvalidTask("min_user_observations must be >= 2".into()));
        }
        Ok(())
    }
}
