use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{day_of, DailyLabel, LocationSample};

/// Eligibility thresholds for including a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortFilter {
    pub min_days: usize,
    pub min_gps_per_day: usize,
}

impl Default for CohortFilter {
    fn default() -> Self {
        Self {
            min_days: 30,
            min_gps_per_day: 35,
        }
    }
}

/// Eligible users and, for each, the days that qualified.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub days: BTreeMap<String, BTreeSet<NaiveDate>>,
}

impl Cohort {
    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.days.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn contains(&self, user: &str, date: NaiveDate) -> bool {
        self.days.get(user).is_some_and(|d| d.contains(&date))
    }

    pub fn retain_labels(&self, labels: &[DailyLabel]) -> Vec<DailyLabel> {
        labels
            .iter()
            .filter(|l| self.contains(&l.user_id, l.date))
            .cloned()
            .collect()
    }

    /// Samples that fall on a qualifying day of an eligible user.
    pub fn retain_samples(&self, samples: &[LocationSample]) -> Vec<LocationSample> {
        samples
            .iter()
            .filter(|s| self.contains(&s.user_id, day_of(s.timestamp)))
            .cloned()
            .collect()
    }

    /// All samples of eligible users, qualifying day or not.
    pub fn retain_user_samples(&self, samples: &[LocationSample]) -> Vec<LocationSample> {
        samples
            .iter()
            .filter(|s| self.days.contains_key(&s.user_id))
            .cloned()
            .collect()
    }
}

impl CohortFilter {
    /// A day qualifies when it has a daily label and at least
    /// `min_gps_per_day` location samples on the same calendar day.
    pub fn apply(&self, labels: &[DailyLabel], samples: &[LocationSample]) -> Cohort {
        let mut gps_counts: BTreeMap<(&str, NaiveDate), usize> = BTreeMap::new();
        for s in samples {
            *gps_counts
                .entry((s.user_id.as_str(), day_of(s.timestamp)))
                .or_default() += 1;
        }
        let mut qualifying: BTreeMap<String, BTreeSet<NaiveDate>> = BTreeMap::new();
        for l in labels {
            let count = gps_counts
                .get(&(l.user_id.as_str(), l.date))
                .copied()
                .unwrap_or(0);
            if count >= self.min_gps_per_day {
                qualifying.entry(l.user_id.clone()).or_default().insert(l.date);
            }
        }
        qualifying.retain(|_, days| days.len() >= self.min_days);
        Cohort { days: qualifying }
    }
}

pub fn filter_cohort(
    labels: &[DailyLabel],
    samples: &[LocationSample],
    min_days: usize,
    min_gps_per_day: usize,
) -> Cohort {
    CohortFilter {
        min_days,
        min_gps_per_day,
    }
    .apply(labels, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
    }

    /// `gps[i]` samples on day i, with a label on every day in `label_days`.
    fn user(id: &str, label_days: usize, gps: &[usize]) -> (Vec<DailyLabel>, Vec<LocationSample>) {
        let labels = (0..label_days)
            .map(|d| DailyLabel {
                user_id: id.into(),
                date: base() + chrono::Duration::days(d as i64),
                level: 1.0,
                binary: None,
            })
            .collect();
        let epoch = base().signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
        let mut samples = Vec::new();
        for (d, &n) in gps.iter().enumerate() {
            for k in 0..n {
                samples.push(LocationSample {
                    user_id: id.into(),
                    timestamp: (epoch.num_days() + d as i64) as f64 * 86_400.0 + k as f64 * 60.0,
                    coords: vec![0.0],
                    stationary: None,
                });
            }
        }
        (labels, samples)
    }

    #[test]
    fn twenty_nine_days_excluded() {
        let (l, s) = user("u", 29, &[35; 29]);
        assert!(filter_cohort(&l, &s, 30, 35).is_empty());
    }

    #[test]
    fn thirty_days_at_threshold_included() {
        let (l, s) = user("u", 30, &[35; 30]);
        let cohort = filter_cohort(&l, &s, 30, 35);
        assert_eq!(cohort.days["u"].len(), 30);
    }

    #[test]
    fn labels_without_enough_gps_excluded() {
        let mut gps = vec![0usize; 60];
        for g in gps.iter_mut().take(10) {
            *g = 40;
        }
        for g in gps.iter_mut().skip(10) {
            *g = 34;
        }
        let (l, s) = user("u", 60, &gps);
        assert!(filter_cohort(&l, &s, 30, 35).is_empty());
    }

    #[test]
    fn only_qualifying_days_retained() {
        let mut gps = vec![35usize; 40];
        gps[3] = 0;
        let (l, s) = user("u", 40, &gps);
        let cohort = filter_cohort(&l, &s, 30, 35);
        let kept = cohort.retain_labels(&l);
        assert_eq!(kept.len(), 39);
        assert!(kept.iter().all(|d| d.date != base() + chrono::Duration::days(3)));
    }

    proptest! {
        #[test]
        fn filtering_is_idempotent(
            users in prop::collection::vec((5usize..12, prop::collection::vec(0usize..6, 12)), 1..5)
        ) {
            let mut labels = Vec::new();
            let mut samples = Vec::new();
            for (i, (n_labels, gps)) in users.iter().enumerate() {
                let (l, s) = user(&format!("u{i}"), *n_labels, gps);
                labels.extend(l);
                samples.extend(s);
            }
            let filter = CohortFilter { min_days: 4, min_gps_per_day: 3 };
            let first = filter.apply(&labels, &samples);
            let second = filter.apply(&first.retain_labels(&labels), &first.retain_samples(&samples));
            prop_assert_eq!(first, second);
        }
    }
}
