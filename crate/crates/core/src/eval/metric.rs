use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Percent of observations predicted incorrectly, in `[0, 100]`.
    PredictionError,
    Rmse,
}

impl Metric {
    pub fn for_target(target: Target) -> Self {
        match target {
            Target::Binary => Metric::PredictionError,
            Target::Level => Metric::Rmse,
        }
    }
}

/// # Panics
/// If the slices differ in length or are empty.
pub fn compute_metric(predictions: &[f64], truths: &[f64], metric: Metric) -> f64 {
    assert_eq!(predictions.len(), truths.len(), "prediction/truth length mismatch");
    assert!(!truths.is_empty(), "metric of an empty sample");
    let n = truths.len() as f64;
    match metric {
        Metric::PredictionError => {
            let wrong = predictions.iter().zip(truths).filter(|(p, t)| p != t).count();
            100.0 * wrong as f64 / n
        }
        Metric::Rmse => {
            let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
            (sse / n).sqrt()
        }
    }
}

/// Majority class of 0/1 labels; a tie goes to 1.
pub fn mode_of(labels: &[f64]) -> f64 {
    let ones = labels.iter().filter(|&&v| v == 1.0).count();
    if 2 * ones >= labels.len() {
        1.0
    } else {
        0.0
    }
}

/// Mean computed about the first value, so a constant series returns that
/// constant exactly.
pub fn mean_of(values: &[f64]) -> f64 {
    let first = values[0];
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// The constant a baseline guesses for `labels`: the mode for binary
/// targets, the mean for levels.
pub fn constant_guess(labels: &[f64], target: Target) -> f64 {
    match target {
        Target::Binary => mode_of(labels),
        Target::Level => mean_of(labels),
    }
}

/// Error of always guessing one user's own mode or mean over their series.
pub fn personal_baseline(labels: &[f64], target: Target) -> f64 {
    let guess = constant_guess(labels, target);
    compute_metric(&vec![guess; labels.len()], labels, Metric::for_target(target))
}

/// Error of guessing the pooled mode or mean for every observation.
pub fn population_baseline(labels: &[f64], target: Target) -> f64 {
    personal_baseline(labels, target)
}

/// Personal baseline error for every user in a long-format label list.
pub fn personal_baselines<'a>(
    labels: impl IntoIterator<Item = (&'a str, f64)>,
    target: Target,
) -> BTreeMap<String, f64> {
    let mut by_user: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (user, v) in labels {
        by_user.entry(user.to_string()).or_default().push(v);
    }
    by_user
        .into_iter()
        .map(|(u, v)| {
            let e = personal_baseline(&v, target);
            (u, e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLiftRecord {
    pub user_id: String,
    pub n_observations: usize,
    pub baseline_error: f64,
    pub model_error: f64,
    /// `baseline_error - model_error`; positive when the model wins.
    pub lift: f64,
}

impl UserLiftRecord {
    pub fn new(user_id: impl Into<String>, n_observations: usize, baseline_error: f64, model_error: f64) -> Self {
        Self {
            user_id: user_id.into(),
            n_observations,
            baseline_error,
            model_error,
            lift: baseline_error - model_error,
        }
    }
}

/// Pairs baseline and model errors by user. Returns the records in user
/// order and the mean lift.
pub fn user_lift(
    baseline_errors: &BTreeMap<String, f64>,
    model_errors: &BTreeMap<String, f64>,
) -> Result<(Vec<UserLiftRecord>, f64), EvalError> {
    if baseline_errors.len() != model_errors.len() || baseline_errors.keys().any(|k| !model_errors.contains_key(k)) {
        return Err(EvalError::UserMismatch);
    }
    if baseline_errors.is_empty() {
        return Err(EvalError::NoEligibleUsers { found: 0 });
    }
    let records: Vec<UserLiftRecord> = baseline_errors
        .iter()
        .map(|(u, &b)| UserLiftRecord::new(u.clone(), 0, b, model_errors[u]))
        .collect();
    let avg = records.iter().map(|r| r.lift).sum::<f64>() / records.len() as f64;
    Ok((records, avg))
}

/// `1 - within / total`, where `within` is the mean squared deviation of
/// each level from its user's mean and `total` the pooled variance. `None`
/// with fewer than two users or zero pooled variance.
pub fn variance_explained_by_personal_baseline(groups: &[Vec<f64>]) -> Option<f64> {
    let groups: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    if groups.len() < 2 {
        return None;
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let total: f64 = groups.iter().flat_map(|g| g.iter()).map(|v| (v - grand).powi(2)).sum();
    let within: f64 = groups
        .iter()
        .map(|g| {
            let m = mean_of(g);
            g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    if total <= 0.0 {
        return None;
    }
    Some(1.0 - within / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        assert_eq!(compute_metric(&[1.0, 0.0], &[1.0, 0.0], Metric::PredictionError), 0.0);
        assert_eq!(compute_metric(&[1.0, 2.0], &[1.0, 2.0], Metric::Rmse), 0.0);
        assert_eq!(
            compute_metric(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 1.0], Metric::PredictionError),
            25.0
        );
        assert_eq!(compute_metric(&[1.0, 1.0], &[0.0, 2.0], Metric::Rmse), 1.0);
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn metric_length_mismatch() {
        compute_metric(&[1.0], &[1.0, 2.0], Metric::Rmse);
    }

    #[test]
    fn personal_baseline_examples() {
        assert_eq!(personal_baseline(&[1.0; 4], Target::Binary), 0.0);
        assert_eq!(personal_baseline(&[3.0; 4], Target::Level), 0.0);
        assert_eq!(personal_baseline(&[1.0, 1.0, 0.0, 1.0, 0.0], Target::Binary), 40.0);
        let r = personal_baseline(&[1.0, 2.0, 3.0], Target::Level);
        assert!((r - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn population_baseline_examples() {
        let mut v = vec![1.0; 70];
        v.extend([0.0; 30]);
        assert!((population_baseline(&v, Target::Binary) - 30.0).abs() < 1e-12);
        assert_eq!(population_baseline(&[0.0, 0.0, 2.0, 2.0], Target::Level), 1.0);
    }

    #[test]
    fn lift_examples_from_published_table() {
        for (b, m, want) in [(29.19, 29.09, "0.10"), (25.17, 23.35, "1.82"), (0.75, 0.78, "-0.03")] {
            let r = UserLiftRecord::new("u", 1, b, m);
            assert_eq!(r.lift, b - m);
            assert_eq!(format!("{:.2}", r.lift), want);
        }
    }

    #[test]
    fn lift_requires_same_users() {
        let a = BTreeMap::from([("a".to_string(), 1.0)]);
        let b = BTreeMap::from([("b".to_string(), 1.0)]);
        assert_eq!(user_lift(&a, &b).unwrap_err(), EvalError::UserMismatch);
        let b = BTreeMap::from([("a".to_string(), 0.25)]);
        assert_eq!(user_lift(&a, &b).unwrap().1, 0.75);
    }

    #[test]
    fn variance_explained_limits() {
        assert_eq!(
            variance_explained_by_personal_baseline(&[vec![1.0; 3], vec![4.0; 5]]),
            Some(1.0)
        );
        assert_eq!(variance_explained_by_personal_baseline(&[vec![2.0; 3], vec![2.0; 3]]), None);
        assert_eq!(variance_explained_by_personal_baseline(&[vec![1.0, 2.0]]), None);
        let same = variance_explained_by_personal_baseline(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(same, 0.0);
    }

    proptest! {
        #[test]
        fn personal_never_worse_than_population(
            users in prop::collection::vec(prop::collection::vec(0u8..2, 1..15), 1..8),
            levels in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 1..15), 1..8),
        ) {
            for (target, groups) in [
                (Target::Binary, users.iter().map(|u| u.iter().map(|&b| f64::from(b)).collect::<Vec<_>>()).collect::<Vec<_>>()),
                (Target::Level, levels.clone()),
            ] {
                let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
                let pop = population_baseline(&pooled, target);
                // Per-user error against the global constant, averaged over users.
                let g = constant_guess(&pooled, target);
                for grp in &groups {
                    let own = personal_baseline(grp, target);
                    let global = compute_metric(&vec![g; grp.len()], grp, Metric::for_target(target));
                    prop_assert!(own <= global + 1e-9);
                }
                if target == Target::Binary {
                    // Pooled miscount: each user's mode miscounts no more than the global mode.
                    let miss: f64 = groups.iter().map(|grp| personal_baseline(grp, target) * grp.len() as f64 / 100.0).sum();
                    prop_assert!(100.0 * miss / pooled.len() as f64 <= pop + 1e-9);
                }
            }
        }
    }
}
