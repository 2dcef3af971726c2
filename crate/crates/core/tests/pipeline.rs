mod common;

use std::fs;

use userlift::eval::{CvScheme, Scope, Target};
use userlift::geofeat::N_FEATURES;
use userlift::pipeline::{
    run_audit, run_evaluate, run_features, run_ingest, run_report, run_synth, PipelineError, RunConfig, TABLE_HEADER,
};

fn config(dir: &std::path::Path, days: &[usize]) -> RunConfig {
    let (gps, labels) = common::write_trace_fixture(dir, days, 5);
    let mut cfg = RunConfig::default();
    cfg.paths.gps = Some(gps);
    cfg.paths.labels = Some(labels);
    cfg.paths.out = Some(dir.join("out"));
    cfg.dataset = "fixture".into();
    cfg.geo.k_max = 6;
    cfg.geo.m_max = 6;
    cfg.geo.restarts = 2;
    cfg
}

#[test]
fn ingest_applies_eligibility_filter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[32, 31, 20]);
    let (data, manifest) = run_ingest(&cfg).unwrap();
    assert_eq!(data.cohort.days.keys().collect::<Vec<_>>(), ["u0", "u1"]);
    assert_eq!(data.labels.len(), 63);
    assert_eq!(manifest.inputs.len(), 2);
    let out = dir.path().join("out");
    for f in ["labels_daily.csv", "locations.csv", "cohort.json", "manifest.json", "manifest.ingest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn features_feed_evaluate_without_editing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), &[31, 31, 31]);
    let (f, _) = run_features(&cfg).unwrap();
    assert_eq!((f.users, f.rows), (3, 93));
    let out = dir.path().join("out");
    let header = fs::read_to_string(out.join("features.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("user_id,date,"));
    assert_eq!(header.split(',').count(), 2 + 2 * N_FEATURES, "{header}");
    assert_eq!(fs::read_dir(out.join("bundles")).unwrap().count(), 3);

    cfg.task.target = Target::Binary;
    cfg.task.cv = CvScheme::KFold(5);
    let (report, _) = run_evaluate(&cfg).unwrap();
    assert_eq!(report.n_users, 3);
    assert_eq!(report.n_observations, 93);
    let (table, _) = run_report(&cfg, &[]).unwrap();
    assert!(table.starts_with(&format!("| {} |", TABLE_HEADER.join(" | "))));
    assert!(table.contains("| fixture | binary | Log.Reg. |"));
}

#[test]
fn feature_extraction_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[31, 31]);
    run_features(&cfg).unwrap();
    let out = dir.path().join("out");
    let first = fs::read(out.join("features.csv")).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| run_features(&cfg)).unwrap();
    assert_eq!(first, fs::read(out.join("features.csv")).unwrap());
}

#[test]
fn no_eligible_users_is_an_evaluation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[10, 12]);
    let err = run_features(&cfg).err().unwrap();
    assert!(matches!(err, PipelineError::NoEligibleUsers(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn malformed_trace_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &[31]);
    let gps = cfg.paths.gps.clone().unwrap();
    let mut text = fs::read_to_string(&gps).unwrap();
    text.push_str("u0,not-a-time,43.7,-72.2\n");
    fs::write(&gps, text).unwrap();
    let err = run_ingest(&cfg).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("line 1490"), "{err}");
}

#[test]
fn missing_input_path_is_an_input_error() {
    let mut cfg = RunConfig::default();
    cfg.paths.out = Some(tempfile::tempdir().unwrap().path().join("o"));
    let err = run_ingest(&cfg).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("paths.gps"));
}

#[test]
fn synth_then_evaluate_level_population() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.paths.out = Some(dir.path().to_path_buf());
    cfg.synth.n_users = 8;
    cfg.synth.days_per_user = 20;
    cfg.synth.target = userlift::synth::TargetSpec::Level {
        sigma_between: 1.0,
        sigma_within: 0.3,
    };
    cfg.task.target = Target::Level;
    cfg.task.scope = Scope::Population;
    cfg.task.cv = CvScheme::KFold(10);
    run_synth(&cfg).unwrap();
    let (r, _) = run_evaluate(&cfg).unwrap();
    assert_eq!(r.n_users, 8);
    assert!(r.variance_explained.unwrap() > 0.5);
    // Population models cannot see the user offsets, so they trail the
    // personal baseline.
    assert!(r.average_lift < 0.0);
    let q = fs::read_to_string(dir.path().join("quantiles.csv")).unwrap();
    assert_eq!(q.lines().count(), 5);
}

#[test]
fn audit_stage_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let studies = dir.path().join("studies.json");
    fs::write(&studies, r#"[{"study_id":"x","k_classes":2,"confusion":[[70,10],[5,15]]}]"#).unwrap();
    let mut cfg = RunConfig::default();
    cfg.paths.out = Some(dir.path().join("out"));
    cfg.paths.studies = Some(studies);
    let (n, m) = run_audit(&cfg).unwrap();
    assert_eq!(n, 1);
    assert_eq!(m.outputs.len(), 1);
    let csv = fs::read_to_string(dir.path().join("out/audit.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("x,2,0.5,0.2,0.15,"), "{csv}");
}
