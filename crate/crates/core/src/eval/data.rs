use std::collections::BTreeMap;
use std::ops::Range;

use chrono::NaiveDate;

use super::{EvalError, Target};
use crate::diagnostics::Diagnostics;
use crate::ingest::DailyLabel;
use crate::table::FeatureRow;

/// One labeled day. Missing feature values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub user_id: String,
    pub date: NaiveDate,
    pub features: Vec<f64>,
    pub label: f64,
}

/// Labeled days sorted by user, then date.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    n_features: usize,
    users: Vec<(String, Range<usize>)>,
}

impl Dataset {
    pub fn new(mut observations: Vec<Observation>) -> Result<Self, EvalError> {
        let n_features = observations.first().map_or(0, |o| o.features.len());
        if let Some(o) = observations.iter().find(|o| o.features.len() != n_features) {
            return Err(EvalError::InvalidData(format!(
                "user {} on {} has {} features, expected {n_features}",
                o.user_id,
                o.date,
                o.features.len()
            )));
        }
        if let Some(o) = observations.iter().find(|o| !o.label.is_finite()) {
            return Err(EvalError::InvalidData(format!("user {} on {} has a non-finite label", o.user_id, o.date)));
        }
        observations.sort_by(|a, b| (&a.user_id, a.date).cmp(&(&b.user_id, b.date)));
        if let Some(w) = observations.windows(2).find(|w| w[0].user_id == w[1].user_id && w[0].date == w[1].date) {
            return Err(EvalError::InvalidData(format!("user {} has two rows for {}", w[0].user_id, w[0].date)));
        }
        let mut users: Vec<(String, Range<usize>)> = Vec::new();
        for (i, o) in observations.iter().enumerate() {
            match users.last_mut() {
                Some((u, r)) if *u == o.user_id => r.end = i + 1,
                _ => users.push((o.user_id.clone(), i..i + 1)),
            }
        }
        Ok(Self {
            observations,
            n_features,
            users,
        })
    }

    /// Inner join of feature rows and daily labels on `(user_id, date)`.
    /// Binary targets use the binarized label, which must be present.
    /// Unmatched rows on either side are dropped with a count warning.
    pub fn from_tables(
        features: &[FeatureRow],
        labels: &[DailyLabel],
        target: Target,
    ) -> Result<(Self, Diagnostics), EvalError> {
        let mut diagnostics = Diagnostics::new();
        let by_key: BTreeMap<(&str, NaiveDate), &DailyLabel> =
            labels.iter().map(|l| ((l.user_id.as_str(), l.date), l)).collect();
        let mut observations = Vec::new();
        let mut unlabeled = 0;
        for row in features {
            let Some(label) = by_key.get(&(row.user_id.as_str(), row.date)) else {
                unlabeled += 1;
                continue;
            };
            let value = match target {
                Target::Level => label.level,
                Target::Binary => match label.binary {
                    Some(b) => f64::from(u8::from(b)),
                    None => {
                        return Err(EvalError::InvalidData(format!(
                            "label for user {} on {} is not binarized",
                            label.user_id, label.date
                        )))
                    }
                },
            };
            observations.push(Observation {
                user_id: row.user_id.clone(),
                date: row.date,
                features: row.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                label: value,
            });
        }
        if unlabeled > 0 {
            diagnostics.warn("unlabeled_feature_rows", format!("{unlabeled} feature rows without a label"));
        }
        let unmatched = labels.len().saturating_sub(observations.len());
        if unmatched > 0 {
            diagnostics.warn("labels_without_features", format!("{unmatched} labeled days without features"));
        }
        Ok((Self::new(observations)?, diagnostics))
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Users in sorted order with the index range of their rows.
    pub fn users(&self) -> &[(String, Range<usize>)] {
        &self.users
    }

    pub fn labels(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.label).collect()
    }

    /// Label series of every user, in user order.
    pub fn label_groups(&self) -> Vec<Vec<f64>> {
        self.users
            .iter()
            .map(|(_, r)| self.observations[r.clone()].iter().map(|o| o.label).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, day).unwrap()
    }

    #[test]
    fn join_sorts_and_groups() {
        let features = vec![
            FeatureRow { user_id: "b".into(), date: d(2), values: vec![Some(1.0), None] },
            FeatureRow { user_id: "a".into(), date: d(1), values: vec![Some(2.0), Some(3.0)] },
            FeatureRow { user_id: "b".into(), date: d(1), values: vec![Some(4.0), Some(5.0)] },
            FeatureRow { user_id: "c".into(), date: d(1), values: vec![Some(4.0), Some(5.0)] },
        ];
        let labels: Vec<DailyLabel> = [("a", 1, 3.0), ("b", 1, 2.0), ("b", 2, 5.0), ("z", 1, 1.0)]
            .iter()
            .map(|&(u, day, level)| DailyLabel { user_id: u.into(), date: d(day), level, binary: Some(level > 2.5) })
            .collect();
        let (ds, diag) = Dataset::from_tables(&features, &labels, Target::Binary).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.users()[1], ("b".to_string(), 1..3));
        assert_eq!(ds.labels(), vec![1.0, 0.0, 1.0]);
        assert!(ds.observations()[2].features[1].is_nan());
        assert_eq!(diag.count("unlabeled_feature_rows"), 1);
        assert_eq!(diag.count("labels_without_features"), 1);
        let (ds, _) = Dataset::from_tables(&features, &labels, Target::Level).unwrap();
        assert_eq!(ds.label_groups(), vec![vec![3.0], vec![2.0, 5.0]]);
    }

    #[test]
    fn duplicate_days_rejected() {
        let o = Observation { user_id: "a".into(), date: d(1), features: vec![], label: 1.0 };
        assert!(Dataset::new(vec![o.clone(), o]).is_err());
    }
}
