use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    compute_metric, constant_guess, cross_validate, personal_baseline, population_baseline,
    variance_explained_by_personal_baseline, BaselineMode, Dataset, EvalError, LearnerSpec, Scope, SelectedConfig,
    Target, TaskSpec, UserLiftRecord,
};
use crate::diagnostics::Diagnostics;
use crate::learn::ConstantLearner;
use crate::seed::derive_seed;
use crate::stats::{distribution_summary, permutation_test, DistributionSummary, PermutationConfig, TestResult};

const PERMUTATION_STREAM: u64 = 0x7E57;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub seed: u64,
    pub n_perm: usize,
    pub exact_limit: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        let p = PermutationConfig::default();
        Self {
            seed: 0,
            n_perm: p.n_perm,
            exact_limit: p.exact_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskSpec,
    pub learner: String,
    pub seed: u64,
    pub n_users: usize,
    pub n_observations: usize,
    pub users: Vec<UserLiftRecord>,
    pub average_lift: f64,
    pub average_personal_baseline_error: f64,
    pub average_model_error: f64,
    /// Error of the pooled mode or mean over every evaluated observation.
    pub population_baseline_error: f64,
    /// Metric over all held-out predictions pooled together.
    pub population_model_error: f64,
    pub p_value: f64,
    pub test: TestResult,
    pub lift_summary: DistributionSummary,
    pub personal_baseline_summary: DistributionSummary,
    pub population_baseline_summary: DistributionSummary,
    pub model_summary: DistributionSummary,
    /// Level targets only; `None` when undefined.
    pub variance_explained: Option<f64>,
    pub selected: Vec<SelectedConfig>,
    pub warnings: Diagnostics,
}

/// Cross-validates the learner, scores each user against their personal
/// baseline and tests whether the mean lift exceeds zero.
pub fn evaluate(
    data: &Dataset,
    spec: &LearnerSpec,
    task: &TaskSpec,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let cv = cross_validate(data, spec, task, opts.seed)?;
    let mut warnings = cv.diagnostics.clone();
    let model_errors = cv.user_errors(data, task.metric);

    let baseline_errors: BTreeMap<String, f64> = match task.baseline {
        BaselineMode::FullSeries => cv
            .evaluated_users
            .iter()
            .map(|&u| {
                let (id, r) = &data.users()[u];
                let labels: Vec<f64> = data.observations()[r.clone()].iter().map(|o| o.label).collect();
                (id.clone(), personal_baseline(&labels, task.target))
            })
            .collect(),
        BaselineMode::Strict => {
            let strict_task = TaskSpec {
                scope: Scope::Personal,
                nested_selection: false,
                min_user_observations: 2,
                ..*task
            };
            let constant = LearnerSpec::custom(
                "personal_baseline",
                ConstantLearner {
                    classify: task.target == Target::Binary,
                },
            );
            // Same seed as the model run, so personal-scope folds coincide.
            let strict = cross_validate(data, &constant, &strict_task, opts.seed)?;
            strict.user_errors(data, task.metric)
        }
    };

    let mut users = Vec::new();
    let mut population_each = Vec::new();
    let mut pooled_pred = Vec::new();
    let mut pooled_truth = Vec::new();
    let evaluated: Vec<usize> = cv
        .evaluated_users
        .iter()
        .copied()
        .filter(|&u| {
            let id = &data.users()[u].0;
            let ok = baseline_errors.contains_key(id);
            if !ok {
                warnings.warn("user_skipped", format!("{id}: no baseline"));
            }
            ok
        })
        .collect();
    for &u in &evaluated {
        let (id, r) = &data.users()[u];
        users.push(UserLiftRecord::new(id.clone(), r.len(), baseline_errors[id], model_errors[id]));
        pooled_pred.extend_from_slice(&cv.predictions[r.clone()]);
        pooled_truth.extend(data.observations()[r.clone()].iter().map(|o| o.label));
    }
    if users.len() < 2 {
        return Err(EvalError::NoEligibleUsers { found: users.len() });
    }
    let global = constant_guess(&pooled_truth, task.target);
    for &u in &evaluated {
        let r = &data.users()[u].1;
        let truth: Vec<f64> = data.observations()[r.clone()].iter().map(|o| o.label).collect();
        population_each.push(compute_metric(&vec![global; truth.len()], &truth, task.metric));
    }

    let lifts: Vec<f64> = users.iter().map(|r| r.lift).collect();
    let baselines: Vec<f64> = users.iter().map(|r| r.baseline_error).collect();
    let models: Vec<f64> = users.iter().map(|r| r.model_error).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let test = permutation_test(
        &lifts,
        &PermutationConfig {
            n_perm: opts.n_perm,
            exact_limit: opts.exact_limit,
            seed: derive_seed(opts.seed, PERMUTATION_STREAM),
        },
    )?;
    let variance_explained = match task.target {
        Target::Level => {
            let groups: Vec<Vec<f64>> = evaluated
                .iter()
                .map(|&u| data.observations()[data.users()[u].1.clone()].iter().map(|o| o.label).collect())
                .collect();
            variance_explained_by_personal_baseline(&groups)
        }
        Target::Binary => None,
    };

    Ok(EvalReport {
        task: *task,
        learner: spec.name(),
        seed: opts.seed,
        n_users: users.len(),
        n_observations: pooled_truth.len(),
        average_lift: mean(&lifts),
        average_personal_baseline_error: mean(&baselines),
        average_model_error: mean(&models),
        population_baseline_error: population_baseline(&pooled_truth, task.target),
        population_model_error: compute_metric(&pooled_pred, &pooled_truth, task.metric),
        p_value: test.p_value,
        test,
        lift_summary: distribution_summary(&lifts)?,
        personal_baseline_summary: distribution_summary(&baselines)?,
        population_baseline_summary: distribution_summary(&population_each)?,
        model_summary: distribution_summary(&models)?,
        variance_explained,
        selected: cv.selected,
        warnings,
        users,
    })
}

/// One line of the box-plot CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub series: String,
    pub p5: f64,
    pub q1: f64,
    pub mean: f64,
    pub q3: f64,
    pub p95: f64,
}

impl EvalReport {
    /// Per-user distributions of the population baseline, personal
    /// baseline, model error and lift.
    pub fn quantile_rows(&self) -> Vec<QuantileRow> {
        [
            ("population_baseline", &self.population_baseline_summary),
            ("personal_baseline", &self.personal_baseline_summary),
            ("model", &self.model_summary),
            ("user_lift", &self.lift_summary),
        ]
        .into_iter()
        .map(|(name, s)| QuantileRow {
            series: name.to_string(),
            p5: s.p5,
            q1: s.q1,
            mean: s.mean,
            q3: s.q3,
            p95: s.p95,
        })
        .collect()
    }
}

pub fn write_quantiles_csv<W: Write>(out: W, report: &EvalReport) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in report.quantile_rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
