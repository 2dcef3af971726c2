//! Seeded synthetic cohorts with known generating parameters.
//!
//! Each user draws a personal parameter (a positive-class rate from a Beta
//! distribution, or a mean level from a Normal), then reports one label per
//! day around it. Features are standard normal; in informative mode the
//! first feature also shifts the label. No location traces are produced:
//! cohorts feed the learners and the evaluation harness directly.

mod oracle;

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Dataset, EvalError, Target};
use crate::ingest::DailyLabel;
use crate::seed::rng_for;
use crate::table::FeatureRow;

pub use oracle::{analytic_oracle, beta_binomial_mode_error, OracleStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TargetSpec {
    /// Per-user rate `p ~ Beta(beta_a, beta_b)`, daily labels Bernoulli(p).
    Binary { beta_a: f64, beta_b: f64 },
    /// Per-user mean `mu ~ N(0, sigma_between^2)`, daily level
    /// `mu + N(0, sigma_within^2)`.
    Level { sigma_between: f64, sigma_within: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FeatureSpec {
    Noise { d: usize },
    /// Adds `signal_strength * x1` to the label's logit (binary) or level.
    Informative { d: usize, signal_strength: f64 },
}

impl FeatureSpec {
    pub fn d(&self) -> usize {
        match *self {
            FeatureSpec::Noise { d } | FeatureSpec::Informative { d, .. } => d,
        }
    }

    pub fn signal(&self) -> f64 {
        match *self {
            FeatureSpec::Noise { .. } => 0.0,
            FeatureSpec::Informative { signal_strength, .. } => signal_strength,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n_users: usize,
    pub days_per_user: usize,
    pub target: TargetSpec,
    pub features: FeatureSpec,
    #[serde(default)]
    pub seed: u64,
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_users == 0 || self.days_per_user == 0 {
            return bad("n_users and days_per_user must be positive".into());
        }
        if self.features.d() == 0 {
            return bad("feature dimension must be at least 1".into());
        }
        let s = self.features.signal();
        if !(s >= 0.0 && s.is_finite()) {
            return bad(format!("signal_strength = {s}"));
        }
        match self.target {
            TargetSpec::Binary { beta_a, beta_b } => {
                if !(beta_a > 0.0 && beta_b > 0.0 && beta_a.is_finite() && beta_b.is_finite()) {
                    return bad(format!("beta parameters must be positive, got ({beta_a}, {beta_b})"));
                }
            }
            TargetSpec::Level {
                sigma_between,
                sigma_within,
            } => {
                if !(sigma_between >= 0.0 && sigma_within >= 0.0 && sigma_between.is_finite() && sigma_within.is_finite())
                {
                    return bad(format!("sigmas must be >= 0, got ({sigma_between}, {sigma_within})"));
                }
            }
        }
        Ok(())
    }

    pub fn eval_target(&self) -> Target {
        match self.target {
            TargetSpec::Binary { .. } => Target::Binary,
            TargetSpec::Level { .. } => Target::Level,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub spec: CohortSpec,
    pub labels: Vec<DailyLabel>,
    pub features: Vec<FeatureRow>,
    /// Each user's drawn rate or mean, in user order.
    pub user_parameters: Vec<f64>,
}

impl SyntheticCohort {
    pub fn dataset(&self) -> Result<Dataset, EvalError> {
        Dataset::from_tables(&self.features, &self.labels, self.spec.eval_target()).map(|(d, _)| d)
    }
}

pub const START_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2020, 1, 1) {
    Some(d) => d,
    None => unreachable!(),
};

fn user_id(u: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("s{u:0width$}")
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<SyntheticCohort, SynthError> {
    spec.validate()?;
    let d = spec.features.d();
    let s = spec.features.signal();
    let users: Vec<_> = (0..spec.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = rng_for(spec.seed, u as u64);
            let id = user_id(u, spec.n_users);
            let param = match spec.target {
                TargetSpec::Binary { beta_a, beta_b } => Beta::new(beta_a, beta_b).expect("validated").sample(&mut rng),
                TargetSpec::Level { sigma_between, .. } => {
                    sigma_between * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                }
            };
            let mut labels = Vec::with_capacity(spec.days_per_user);
            let mut rows = Vec::with_capacity(spec.days_per_user);
            for day in 0..spec.days_per_user {
                let date = START_DATE + Days::new(day as u64);
                let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let label = match spec.target {
                    TargetSpec::Binary { .. } => {
                        let q = if s == 0.0 { param } else { sigmoid(logit(param) + s * x[0]) };
                        let y = rng.random::<f64>() < q;
                        DailyLabel {
                            user_id: id.clone(),
                            date,
                            level: f64::from(u8::from(y)),
                            binary: Some(y),
                        }
                    }
                    TargetSpec::Level { sigma_within, .. } => {
                        let noise = Normal::new(0.0, sigma_within).expect("validated").sample(&mut rng);
                        DailyLabel {
                            user_id: id.clone(),
                            date,
                            level: param + s * x[0] + noise,
                            binary: None,
                        }
                    }
                };
                labels.push(label);
                rows.push(FeatureRow {
                    user_id: id.clone(),
                    date,
                    values: x.into_iter().map(Some).collect(),
                });
            }
            (param, labels, rows)
        })
        .collect();

    let mut cohort = SyntheticCohort {
        spec: *spec,
        labels: Vec::with_capacity(spec.n_users * spec.days_per_user),
        features: Vec::with_capacity(spec.n_users * spec.days_per_user),
        user_parameters: Vec::with_capacity(spec.n_users),
    };
    for (p, l, f) in users {
        cohort.user_parameters.push(p);
        cohort.labels.extend(l);
        cohort.features.extend(f);
    }
    Ok(cohort)
}
