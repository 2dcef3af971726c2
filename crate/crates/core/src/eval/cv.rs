use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_metric, CvScheme, Dataset, EvalError, Metric, Scope, TaskSpec, Target};
use crate::diagnostics::Diagnostics;
use crate::learn::{fold_assignment, select_hyperparameters, Learner, LearnerConfig};
use crate::seed::{derive_seed, string_key};

/// What to train in each split: a grid of built-in learner configurations
/// (selected by k-fold CV when it holds more than one entry) or any
/// external [`Learner`].
#[derive(Clone)]
pub enum LearnerSpec {
    Grid(Vec<LearnerConfig>),
    Custom { name: String, learner: Arc<dyn Learner> },
}

impl fmt::Debug for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Grid(g) => f.debug_tuple("Grid").field(g).finish(),
            LearnerSpec::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

impl LearnerSpec {
    pub fn fixed(config: LearnerConfig) -> Self {
        LearnerSpec::Grid(vec![config])
    }

    pub fn custom(name: impl Into<String>, learner: impl Learner + 'static) -> Self {
        LearnerSpec::Custom {
            name: name.into(),
            learner: Arc::new(learner),
        }
    }

    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Grid(g) => match g.first() {
                Some(c) => format!("{:?}", c.kind).to_lowercase(),
                None => "empty".into(),
            },
            LearnerSpec::Custom { name, .. } => name.clone(),
        }
    }

    fn check(&self, target: Target) -> Result<(), EvalError> {
        if let LearnerSpec::Grid(g) = self {
            if g.is_empty() {
                return Err(crate::learn::LearnError::EmptyGrid.into());
            }
            for c in g {
                c.validate()?;
                if c.kind.is_classifier() != (target == Target::Binary) {
                    return Err(EvalError::InvalidTask(format!(
                        "learner {:?} cannot predict a {:?} target",
                        c.kind, target
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Configuration chosen for one model scope (`population`, a user id, or
/// `<scope>#<fold>` under nested selection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedConfig {
    pub scope: String,
    pub config: LearnerConfig,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// Held-out prediction for every dataset row; NaN for skipped users.
    pub predictions: Vec<f64>,
    /// Indices into [`Dataset::users`] of users that received predictions.
    pub evaluated_users: Vec<usize>,
    /// Number of training runs in the outer splits (selection excluded).
    pub fits: usize,
    pub selected: Vec<SelectedConfig>,
    pub diagnostics: Diagnostics,
}

impl CvResult {
    /// Metric over each evaluated user's held-out predictions.
    pub fn user_errors(&self, data: &Dataset, metric: Metric) -> BTreeMap<String, f64> {
        self.evaluated_users
            .iter()
            .map(|&u| {
                let (id, r) = &data.users()[u];
                let truth: Vec<f64> = data.observations()[r.clone()].iter().map(|o| o.label).collect();
                (id.clone(), compute_metric(&self.predictions[r.clone()], &truth, metric))
            })
            .collect()
    }
}

enum Resolved<'a> {
    Config(LearnerConfig),
    Custom(&'a dyn Learner),
}

impl Resolved<'_> {
    fn learner(&self) -> &dyn Learner {
        match self {
            Resolved::Config(c) => c,
            Resolved::Custom(l) => *l,
        }
    }
}

/// Column means over `rows`, ignoring NaN; a column with no values gets 0.
fn column_means(data: &Dataset, rows: &[usize]) -> Vec<f64> {
    let obs = data.observations();
    (0..data.n_features())
        .map(|j| {
            let (sum, count) = rows
                .iter()
                .map(|&i| obs[i].features[j])
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect()
}

fn design(data: &Dataset, rows: &[usize], means: &[f64]) -> (Array2<f64>, Array1<f64>) {
    let obs = data.observations();
    let x = Array2::from_shape_fn((rows.len(), data.n_features()), |(i, j)| {
        let v = obs[rows[i]].features[j];
        if v.is_nan() {
            means[j]
        } else {
            v
        }
    });
    let y = rows.iter().map(|&i| obs[i].label).collect();
    (x, y)
}

fn resolve<'a>(
    spec: &'a LearnerSpec,
    data: &Dataset,
    rows: &[usize],
    folds: usize,
    seed: u64,
    diagnostics: &mut Diagnostics,
) -> Result<Resolved<'a>, EvalError> {
    match spec {
        LearnerSpec::Custom { learner, .. } => Ok(Resolved::Custom(learner.as_ref())),
        LearnerSpec::Grid(grid) if grid.len() == 1 => Ok(Resolved::Config(grid[0])),
        LearnerSpec::Grid(grid) => {
            let (x, y) = design(data, rows, &column_means(data, rows));
            let sel = select_hyperparameters(x.view(), y.view(), grid, folds, seed)?;
            diagnostics.extend(sel.diagnostics);
            Ok(Resolved::Config(sel.best))
        }
    }
}

struct Unit {
    predictions: Vec<(usize, f64)>,
    fits: usize,
    selected: Vec<SelectedConfig>,
    diagnostics: Diagnostics,
}

/// Held-out index sets over `rows` for the scheme.
fn test_sets(rows: &[usize], cv: CvScheme, seed: u64, label: &str, diagnostics: &mut Diagnostics) -> Vec<Vec<usize>> {
    match cv {
        CvScheme::Loo => rows.iter().map(|&r| vec![r]).collect(),
        CvScheme::KFold(k) => {
            let k = if rows.len() < k {
                diagnostics.warn("folds_reduced", format!("{label}: rows={} folds={k} -> {}", rows.len(), rows.len()));
                rows.len()
            } else {
                k
            };
            let assignment = fold_assignment(rows.len(), k, seed);
            let mut sets = vec![Vec::new(); k];
            for (pos, &f) in assignment.iter().enumerate() {
                sets[f].push(rows[pos]);
            }
            sets
        }
    }
}

fn run_unit(
    data: &Dataset,
    rows: &[usize],
    spec: &LearnerSpec,
    task: &TaskSpec,
    seed: u64,
    label: &str,
) -> Result<Unit, EvalError> {
    let mut diagnostics = Diagnostics::new();
    let sets = test_sets(rows, task.cv, derive_seed(seed, 1), label, &mut diagnostics);
    let mut selected = Vec::new();
    let fixed = if task.nested_selection {
        None
    } else {
        let r = resolve(spec, data, rows, task.selection_folds, derive_seed(seed, 2), &mut diagnostics)?;
        if let Resolved::Config(c) = r {
            selected.push(SelectedConfig {
                scope: label.to_string(),
                config: c,
            });
        }
        Some(r)
    };

    let outcomes: Vec<_> = sets
        .par_iter()
        .enumerate()
        .map(|(f, test)| -> Result<_, EvalError> {
            let mut diag = Diagnostics::new();
            let train: Vec<usize> = rows.iter().copied().filter(|r| !test.contains(r)).collect();
            let means = column_means(data, &train);
            let nested;
            let resolved = match &fixed {
                Some(r) => r,
                None => {
                    let s = derive_seed(seed, 3 + f as u64);
                    nested = resolve(spec, data, &train, task.selection_folds, s, &mut diag)?;
                    &nested
                }
            };
            let (x, y) = design(data, &train, &means);
            let model = resolved.learner().fit(x.view(), y.view())?;
            let (xt, _) = design(data, test, &means);
            let pred = model.predict(xt.view());
            let chosen = match (&fixed, resolved) {
                (None, Resolved::Config(c)) => Some(SelectedConfig {
                    scope: format!("{label}#{f}"),
                    config: *c,
                }),
                _ => None,
            };
            Ok((test.iter().copied().zip(pred).collect::<Vec<_>>(), chosen, diag))
        })
        .collect();

    let mut predictions = Vec::with_capacity(rows.len());
    let fits = outcomes.len();
    for o in outcomes {
        let (p, chosen, diag) = o?;
        predictions.extend(p);
        selected.extend(chosen);
        diagnostics.extend(diag);
    }
    Ok(Unit {
        predictions,
        fits,
        selected,
        diagnostics,
    })
}

/// Produces one held-out prediction per row. Population scope pools all
/// rows into one model family; personal scope runs each user separately
/// and skips users with fewer than `task.min_user_observations` rows or
/// whose splits cannot be fit. Missing features are mean-imputed from the
/// training rows of each split. Output ordering does not depend on the
/// number of worker threads.
pub fn cross_validate(data: &Dataset, spec: &LearnerSpec, task: &TaskSpec, seed: u64) -> Result<CvResult, EvalError> {
    task.validate()?;
    spec.check(task.target)?;
    let mut predictions = vec![f64::NAN; data.len()];
    let mut diagnostics = Diagnostics::new();
    let mut selected = Vec::new();
    let mut fits = 0;
    let mut evaluated_users = Vec::new();

    match task.scope {
        Scope::Population => {
            if data.len() < 2 {
                return Err(EvalError::InvalidData(format!("population scope needs 2 rows, got {}", data.len())));
            }
            let rows: Vec<usize> = (0..data.len()).collect();
            let unit = run_unit(data, &rows, spec, task, derive_seed(seed, 0), "population")?;
            for (i, p) in unit.predictions {
                predictions[i] = p;
            }
            fits = unit.fits;
            selected = unit.selected;
            diagnostics.extend(unit.diagnostics);
            evaluated_users = (0..data.users().len()).collect();
        }
        Scope::Personal => {
            let units: Vec<_> = data
                .users()
                .par_iter()
                .map(|(user, range)| {
                    if range.len() < task.min_user_observations {
                        return None;
                    }
                    let rows: Vec<usize> = range.clone().collect();
                    Some(run_unit(data, &rows, spec, task, derive_seed(seed, string_key(user)), user))
                })
                .collect();
            for (u, unit) in units.into_iter().enumerate() {
                let (user, range) = &data.users()[u];
                match unit {
                    None => diagnostics.warn(
                        "user_skipped",
                        format!("{user}: {} observations, need {}", range.len(), task.min_user_observations),
                    ),
                    Some(Err(e)) => diagnostics.warn("user_skipped", format!("{user}: {e}")),
                    Some(Ok(unit)) => {
                        for (i, p) in unit.predictions {
                            predictions[i] = p;
                        }
                        fits += unit.fits;
                        selected.extend(unit.selected);
                        diagnostics.extend(unit.diagnostics);
                        evaluated_users.push(u);
                    }
                }
            }
        }
    }
    Ok(CvResult {
        predictions,
        evaluated_users,
        fits,
        selected,
        diagnostics,
    })
}
