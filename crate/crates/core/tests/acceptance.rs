//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any required criterion fails.
//!
//! Criterion 12 needs the public StudentLife data converted to the ingest
//! formats (`gps.csv`, `labels.csv` holding daily stress reports on a 1-5
//! scale). Point `USERLIFT_STUDENTLIFE_DIR` at that directory to run it.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use userlift::audit::{baseline_from_confusion, uniform_baseline, ConfusionMatrix};
use userlift::eval::{
    evaluate, personal_baseline, population_baseline, EvalOptions, EvalReport, LearnerSpec, Scope, Target, TaskSpec,
    UserLiftRecord,
};
use userlift::geofeat::kmeans::fit_kmeans;
use userlift::geofeat::{fit_em, fit_gmm_bic, min_enclosing_circle, EmConfig, GmmConfig};
use userlift::learn::{
    default_grid, fit_elastic_net, fit_elastic_net_traced, logistic_gradient, logistic_objective, soft_threshold,
    LearnerConfig, LearnerKind, Standardization,
};
use userlift::pipeline::{self, RunConfig};
use userlift::seed::rng_for;
use userlift::stats::{permutation_test, PermutationConfig};
use userlift::synth::{analytic_oracle, generate_cohort, CohortSpec, FeatureSpec, TargetSpec};

const RUNS: u64 = 100;
const USERS: usize = 31;
const DAYS: usize = 60;
const NULL_LIFT_TOL: f64 = 0.02;
const NULL_ALPHA: f64 = 0.05;
const MIN_PASSING_RUNS: usize = 95;
const NULL_BUDGET: Duration = Duration::from_secs(300);
const SIGNAL: f64 = 4.0;
const MAX_BAYES_ERROR: f64 = 15.0;
const POSITIVE_ALPHA: f64 = 0.01;
const VE_RANGE: (f64, f64) = (0.81, 0.88);
const VE_USERS: usize = 300;
const VE_SEEDS: u64 = 20;
const MC_PERMUTATIONS: usize = 100_000;
const MC_TOL: f64 = 0.01;
const MC_SEEDS: u64 = 20;
const CIRCLE_SETS: usize = 500;
const CIRCLE_TOL: f64 = 1e-9;
const OLS_TOL: f64 = 1e-6;
const LASSO_TOL: f64 = 1e-6;
const GRADIENT_REL_TOL: f64 = 1e-5;
const EM_SLACK: f64 = 1e-9;
const BLOB_SEEDS: u64 = 100;
const STUDENTLIFE_STRESS_BASELINE: f64 = 29.19;
const STUDENTLIFE_TOL: f64 = 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn binary_spec(seed: u64, features: FeatureSpec) -> CohortSpec {
    CohortSpec {
        n_users: USERS,
        days_per_user: DAYS,
        target: TargetSpec::Binary { beta_a: 2.0, beta_b: 5.0 },
        features,
        seed,
    }
}

fn level_spec(seed: u64, sigma_within: f64) -> CohortSpec {
    CohortSpec {
        target: TargetSpec::Level {
            sigma_between: 1.0,
            sigma_within,
        },
        ..binary_spec(seed, FeatureSpec::Noise { d: 5 })
    }
}

fn run_cohort(spec: &CohortSpec, scope: Scope) -> EvalReport {
    let data = generate_cohort(spec).unwrap().dataset().unwrap();
    let target = spec.eval_target();
    let kind = match target {
        Target::Binary => LearnerKind::LogisticL2,
        Target::Level => LearnerKind::ElasticNet,
    };
    let opts = EvalOptions {
        seed: spec.seed,
        ..EvalOptions::default()
    };
    evaluate(&data, &LearnerSpec::Grid(default_grid(kind)), &TaskSpec::new(target, scope), &opts).unwrap()
}

/// Lift in the units the tolerance is stated in: fractions for binary
/// targets, RMSE units for levels.
fn lift_units(r: &EvalReport) -> f64 {
    match r.task.target {
        Target::Binary => r.average_lift / 100.0,
        Target::Level => r.average_lift,
    }
}

fn null_reports() -> (Vec<EvalReport>, Vec<EvalReport>, Duration) {
    let start = Instant::now();
    let binary: Vec<EvalReport> = (0..RUNS)
        .into_par_iter()
        .map(|s| run_cohort(&binary_spec(s, FeatureSpec::Noise { d: 5 }), Scope::Personal))
        .collect();
    let level: Vec<EvalReport> = (0..RUNS)
        .into_par_iter()
        .map(|s| run_cohort(&level_spec(s, 0.3), Scope::Personal))
        .collect();
    (binary, level, start.elapsed())
}

fn c1_null_cohort(binary: &[EvalReport], level: &[EvalReport], elapsed: Duration) -> Outcome {
    let ok = |rs: &[EvalReport]| {
        rs.iter()
            .filter(|r| lift_units(r).abs() <= NULL_LIFT_TOL && r.p_value > NULL_ALPHA)
            .count()
    };
    let worst = |rs: &[EvalReport]| rs.iter().map(|r| lift_units(r).abs()).fold(0.0, f64::max);
    let (b, l) = (ok(binary), ok(level));
    outcome(
        b >= MIN_PASSING_RUNS && l >= MIN_PASSING_RUNS && elapsed < NULL_BUDGET,
        format!(
            "binary {b}/{RUNS}, level {l}/{RUNS} runs with |lift| <= {NULL_LIFT_TOL} and p > {NULL_ALPHA}; \
             max |lift| {:.4} / {:.4}; {:.1}s",
            worst(binary),
            worst(level),
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_positive_control() -> Outcome {
    let features = FeatureSpec::Informative {
        d: 5,
        signal_strength: SIGNAL,
    };
    let bayes = analytic_oracle(&binary_spec(0, features)).bayes_error;
    let reports: Vec<EvalReport> = (0..RUNS)
        .into_par_iter()
        .map(|s| run_cohort(&binary_spec(1000 + s, features), Scope::Personal))
        .collect();
    let hits = reports
        .iter()
        .filter(|r| r.average_lift > 0.0 && r.p_value < POSITIVE_ALPHA)
        .count();
    let mean_lift = reports.iter().map(|r| r.average_lift).sum::<f64>() / reports.len() as f64;
    outcome(
        bayes <= MAX_BAYES_ERROR && hits >= MIN_PASSING_RUNS,
        format!(
            "signal {SIGNAL}: Bayes error {bayes:.2}%; lift > 0 and p < {POSITIVE_ALPHA} in {hits}/{RUNS}; mean lift {mean_lift:.2} points"
        ),
    )
}

fn c3_variance_explained() -> Outcome {
    let oracle = analytic_oracle(&level_spec(0, 0.43)).variance_explained.unwrap();
    let values: Vec<f64> = (0..VE_SEEDS)
        .into_par_iter()
        .map(|s| {
            let spec = CohortSpec {
                n_users: VE_USERS,
                ..level_spec(2000 + s, 0.43)
            };
            let data = generate_cohort(&spec).unwrap().dataset().unwrap();
            let opts = EvalOptions {
                seed: s,
                ..EvalOptions::default()
            };
            let fixed = LearnerSpec::fixed(LearnerConfig::elastic_net(10.0, 1.0));
            let r = evaluate(&data, &fixed, &TaskSpec::new(Target::Level, Scope::Personal), &opts).unwrap();
            r.variance_explained.unwrap()
        })
        .collect();
    let inside = values.iter().filter(|v| (VE_RANGE.0..=VE_RANGE.1).contains(*v)).count();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    outcome(
        inside == values.len(),
        format!(
            "{inside}/{VE_SEEDS} cohorts of {VE_USERS} users in [{}, {}]; observed {lo:.3}..{hi:.3}; analytic {oracle:.3}",
            VE_RANGE.0, VE_RANGE.1
        ),
    )
}

fn c4_baseline_ordering() -> Outcome {
    let mut violations = 0;
    let mut cohorts = 0;
    for s in 0..RUNS {
        for spec in [binary_spec(s, FeatureSpec::Noise { d: 1 }), level_spec(s, 0.3)] {
            let data = generate_cohort(&spec).unwrap().dataset().unwrap();
            let target = spec.eval_target();
            let groups = data.label_groups();
            let personal = groups.iter().map(|g| personal_baseline(g, target)).sum::<f64>() / groups.len() as f64;
            let population = population_baseline(&data.labels(), target);
            violations += usize::from(personal > population);
            cohorts += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations across {cohorts} cohorts"))
}

fn c5_permutation_exactness() -> Outcome {
    let exact = PermutationConfig::default();
    let positive: Vec<f64> = (1..=10).map(f64::from).collect();
    let p_pos = permutation_test(&positive, &exact).unwrap().p_value;
    let p_zero = permutation_test(&[0.0; 10], &exact).unwrap().p_value;
    let mixed = [0.8, -0.3, 0.5, 1.2, -0.9, 0.4, 0.1, -0.2, 0.7, -0.6];
    let p_exact = permutation_test(&mixed, &exact).unwrap().p_value;
    let worst = (0..MC_SEEDS)
        .map(|s| {
            let mc = PermutationConfig {
                n_perm: MC_PERMUTATIONS,
                exact_limit: 0,
                seed: s,
            };
            (permutation_test(&mixed, &mc).unwrap().p_value - p_exact).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        p_pos == 1.0 / 1024.0 && p_zero == 1.0 && worst <= MC_TOL,
        format!(
            "positive p = {p_pos} (1/1024 = {}); zeros p = {p_zero}; Monte Carlo max deviation {worst:.4} from exact {p_exact:.4}",
            1.0 / 1024.0
        ),
    )
}

fn c6_geometry() -> Outcome {
    let mut rng = rng_for(6, 0);
    let mut worst_radius = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..CIRCLE_SETS {
        let n = rng.random_range(1..=12);
        let pts = common::random_points(&mut rng, n);
        let c = min_enclosing_circle(&pts).unwrap();
        let (_, r) = common::brute_force_circle(&pts);
        worst_radius = worst_radius.max((c.radius - r).abs());
        for p in &pts {
            let d = ((p[0] - c.center[0]).powi(2) + (p[1] - c.center[1]).powi(2)).sqrt();
            worst_excess = worst_excess.max(d - c.radius);
        }
    }
    outcome(
        worst_radius <= CIRCLE_TOL && worst_excess <= CIRCLE_TOL,
        format!("{CIRCLE_SETS} sets: max radius gap {worst_radius:.2e}, max excess distance {worst_excess:.2e}"),
    )
}

fn c7_optimizers() -> Outcome {
    let mut ols_gap = 0.0f64;
    for seed in 0..10 {
        let x = common::normal_matrix(60, 4, seed);
        let mut rng = rng_for(seed, 1);
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| 1.0 + r[0] - 2.0 * r[2] + rng.random_range(-1.0..1.0))
            .collect();
        let (b, w) = fit_elastic_net(x.view(), ndarray::Array1::from(y.clone()).view(), 0.0, 0.5)
            .unwrap()
            .raw_coefficients();
        let (b0, w0) = common::ols(&x, &y);
        ols_gap = w.iter().zip(&w0).map(|(a, e)| (a - e).abs()).fold((b - b0).abs(), f64::max).max(ols_gap);
    }

    let x = common::hadamard_design();
    let z = Standardization::fit(x.view()).transform(x.view());
    let mut lasso_gap = 0.0f64;
    let mut rng = rng_for(7, 2);
    for _ in 0..20 {
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let alpha = rng.random_range(0.0..1.5);
        let m = fit_elastic_net(x.view(), ndarray::Array1::from(y.clone()).view(), alpha, 1.0).unwrap();
        for j in 0..7 {
            let corr = (0..8).map(|i| z[[i, j]] * y[i]).sum::<f64>() / 8.0;
            lasso_gap = lasso_gap.max((m.weights[j] - soft_threshold(corr, alpha)).abs());
        }
    }

    let mut grad_rel = 0.0f64;
    for seed in 0..10 {
        let z = common::normal_matrix(40, 3, seed);
        let mut rng = rng_for(seed, 3);
        let y: ndarray::Array1<f64> = (0..40).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let params: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = logistic_gradient(z.view(), y.view(), 0.5, &params);
        let fd = common::central_difference(|p| logistic_objective(z.view(), y.view(), 0.5, p), &params, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            grad_rel = grad_rel.max((a - b).abs() / a.abs().max(b.abs()).max(1e-3));
        }
    }

    let mut em_drop = 0.0f64;
    for seed in 0..30 {
        let x = common::two_blobs(seed, 40);
        for k in 1..=5 {
            let fit = fit_em(x.view(), k, &mut rng_for(seed, k as u64), &EmConfig::default());
            for w in fit.trace.windows(2) {
                em_drop = em_drop.max(w[0] - w[1]);
            }
        }
    }
    let mut en_rise = 0.0f64;
    for seed in 0..10 {
        let x = common::normal_matrix(30, 6, seed);
        let y = x.column(0).to_owned() * 2.0 + x.column(1);
        let (_, trace) = fit_elastic_net_traced(x.view(), y.view(), 0.05, 0.5).unwrap();
        for w in trace.windows(2) {
            en_rise = en_rise.max(w[1] - w[0]);
        }
    }
    outcome(
        ols_gap <= OLS_TOL && lasso_gap <= LASSO_TOL && grad_rel <= GRADIENT_REL_TOL && em_drop <= EM_SLACK,
        format!(
            "OLS gap {ols_gap:.1e}; lasso gap {lasso_gap:.1e}; gradient rel. error {grad_rel:.1e}; \
             max EM decrease {em_drop:.1e}; max CD objective increase {en_rise:.1e}"
        ),
    )
}

fn c8_model_selection() -> Outcome {
    let hits = (0..BLOB_SEEDS)
        .into_par_iter()
        .filter(|&seed| {
            let cfg = GmmConfig {
                seed,
                ..GmmConfig::default()
            };
            fit_gmm_bic(common::two_blobs(seed, 100).view(), &cfg).unwrap().model.n_components() == 2
        })
        .count();
    let point_mass = Array2::from_elem((40, 2), 1.5);
    let k1 = fit_gmm_bic(point_mass.view(), &GmmConfig::default()).unwrap().model.n_components();
    let km = fit_kmeans(point_mass.view(), 1, &mut rng_for(0, 0)).inertia;
    outcome(
        hits >= MIN_PASSING_RUNS && k1 == 1,
        format!("two blobs -> K=2 in {hits}/{BLOB_SEEDS}; point mass -> K={k1} (k-means inertia {km})"),
    )
}

fn c9_audit() -> Outcome {
    let b = baseline_from_confusion(&ConfusionMatrix::new(vec![vec![70, 10], vec![5, 15]]).unwrap());
    let (u2, u5) = (uniform_baseline(2).unwrap(), uniform_baseline(5).unwrap());
    outcome(
        b.baseline_accuracy == 0.80 && b.model_accuracy == 0.85 && u2 == 0.50 && u5 == 0.80,
        format!(
            "confusion -> ({}, {}); uniform(2) = {u2}, uniform(5) = {u5}",
            b.baseline_accuracy, b.model_accuracy
        ),
    )
}

fn c10_lift_arithmetic() -> Outcome {
    let rows = [(29.19, 29.09, "0.10"), (25.17, 23.35, "1.82"), (0.75, 0.78, "-0.03")];
    let got: Vec<String> = rows
        .iter()
        .map(|&(b, m, _)| format!("{:.2}", UserLiftRecord::new("u", 1, b, m).lift))
        .collect();
    let pass = rows.iter().zip(&got).all(|(r, g)| r.2 == g);
    outcome(pass, format!("lifts {}", got.join(", ")))
}

fn c11_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let run = |dir: &str, threads: usize, from: Option<&std::path::Path>| -> Vec<u8> {
        let mut cfg = match from {
            Some(m) => RunConfig::load(m).unwrap(),
            None => {
                let mut c = RunConfig {
                    seed: 17,
                    ..RunConfig::default()
                };
                c.synth.n_users = 12;
                c.synth.days_per_user = 40;
                c
            }
        };
        cfg.threads = threads;
        cfg.paths.out = Some(root.path().join(dir));
        pipeline::with_threads(threads, || {
            pipeline::run_synth(&cfg)?;
            pipeline::run_evaluate(&cfg)
        })
        .unwrap();
        std::fs::read(root.path().join(dir).join("eval_report.json")).unwrap()
    };
    let a = run("a", 1, None);
    let b = run("b", 8, None);
    let manifest = root.path().join("a/manifest.evaluate.json");
    let c = run("c", 8, Some(&manifest));
    let d = run("d", 1, Some(&manifest));
    outcome(
        a == b && a == c && a == d,
        format!("eval_report.json ({} bytes): 1 vs 8 workers equal {}, manifest reruns equal {}", a.len(), a == b, a == c && a == d),
    )
}

fn c12_studentlife() -> Option<Outcome> {
    let dir = std::env::var_os("USERLIFT_STUDENTLIFE_DIR")?;
    let dir = std::path::PathBuf::from(dir);
    let out = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        dataset: "StudentLife".into(),
        ..RunConfig::default()
    };
    cfg.paths.gps = Some(dir.join("gps.csv"));
    cfg.paths.labels = Some(dir.join("labels.csv"));
    cfg.paths.out = Some(out.path().to_path_buf());
    let result = pipeline::run_features(&cfg).and_then(|_| pipeline::run_evaluate(&cfg));
    Some(match result {
        Ok((r, _)) => {
            let e = r.average_personal_baseline_error;
            outcome(
                (e - STUDENTLIFE_STRESS_BASELINE).abs() <= STUDENTLIFE_TOL,
                format!("personal baseline error {e:.2}% vs {STUDENTLIFE_STRESS_BASELINE}% over {} users", r.n_users),
            )
        }
        Err(e) => outcome(false, format!("pipeline failed: {e}")),
    })
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

type Criterion<'a> = (u32, &'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn main() {
    let (binary, level, elapsed) = null_reports();
    let criteria: Vec<Criterion> = vec![
        (1, "null-cohort honesty", Box::new(|| c1_null_cohort(&binary, &level, elapsed))),
        (2, "positive control", Box::new(c2_positive_control)),
        (3, "variance explained by personal baseline", Box::new(c3_variance_explained)),
        (4, "baseline ordering", Box::new(c4_baseline_ordering)),
        (5, "permutation-test exactness", Box::new(c5_permutation_exactness)),
        (6, "enclosing-circle oracle", Box::new(c6_geometry)),
        (7, "optimizer oracles", Box::new(c7_optimizers)),
        (8, "mixture model selection", Box::new(c8_model_selection)),
        (9, "audit exactness", Box::new(c9_audit)),
        (10, "user-lift arithmetic", Box::new(c10_lift_arithmetic)),
        (11, "determinism", Box::new(c11_determinism)),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let o = guarded(f);
        failed += usize::from(!o.pass);
        println!("{} criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    match guarded_optional() {
        Some(o) => println!(
            "{} criterion 12 StudentLife stress baseline (optional, non-blocking): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        ),
        None => println!("SKIP criterion 12 StudentLife stress baseline (optional): USERLIFT_STUDENTLIFE_DIR not set"),
    }
    if failed > 0 {
        println!("{failed} required criteria failed");
        std::process::exit(1);
    }
}

fn guarded_optional() -> Option<Outcome> {
    catch_unwind(c12_studentlife).unwrap_or_else(|_| Some(outcome(false, "panicked")))
}
