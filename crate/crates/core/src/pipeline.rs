//! Run configuration, file-level pipeline stages and reproducibility
//! manifests. The command-line tool is a thin layer over this module.
//!
//! Every stage writes into one output directory:
//!
//! ```text
//! <out>/labels_daily.csv   daily labels of eligible users
//! <out>/locations.csv      normalized location samples (ingest)
//! <out>/cohort.json        eligible users and their qualifying days
//! <out>/features.csv       one row per user-day, f1..f15 plus missing masks
//! <out>/bundles/<user>.json
//! <out>/eval_report.json
//! <out>/quantiles.csv
//! <out>/table1.md
//! <out>/audit.csv
//! <out>/manifest.json   the latest run
//! <out>/manifest.<command>.json
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audit::{audit_study, read_study_records, write_audit_csv, AuditError};
use crate::eval::{
    evaluate, write_quantiles_csv, BaselineMode, CvScheme, Dataset, EvalError, EvalOptions, EvalReport, LearnerSpec,
    Scope, Target, TaskSpec,
};
use crate::geofeat::{extract_features, FeatureConfig, GeoError};
use crate::ingest::{
    aggregate_daily, binarize_all, parse_label_csv, parse_location_csv, read_daily_labels_csv,
    write_daily_labels_csv, write_location_csv, Cohort, CohortFilter, CoordMode, DailyLabel, Direction, IngestError,
    LikertScale,
};
use crate::learn::{default_grid, LearnerConfig, LearnerKind};
use crate::seed::derive_seed;
use crate::synth::{analytic_oracle, generate_cohort, CohortSpec, FeatureSpec, SynthError, TargetSpec};
use crate::table::{read_feature_csv, write_feature_csv, TableError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no eligible users: {0}")]
    NoEligibleUsers(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 2 for problems with the inputs or configuration, 1 for failures of
    /// the analysis itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Ingest(_)
            | PipelineError::Table(_)
            | PipelineError::Input { .. }
            | PipelineError::Audit(_)
            | PipelineError::Synth(_) => 2,
            PipelineError::Eval(EvalError::InvalidTask(_) | EvalError::InvalidData(_)) => 2,
            PipelineError::Geo(GeoError::Config(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw location samples: `user_id,timestamp,x,y[,stationary]`.
    pub gps: Option<PathBuf>,
    /// Raw self-reports: `user_id,timestamp,value`.
    pub labels: Option<PathBuf>,
    /// Feature table; defaults to `<out>/features.csv`.
    pub features: Option<PathBuf>,
    /// Daily label table; defaults to `<out>/labels_daily.csv`.
    pub daily_labels: Option<PathBuf>,
    /// Study records for `audit`.
    pub studies: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoSettings {
    pub coord_mode: CoordMode,
    pub stationary_threshold_kmh: f64,
    pub max_gap_s: f64,
    pub k_max: usize,
    pub m_max: usize,
    pub restarts: usize,
    pub variance_floor: f64,
}

impl Default for GeoSettings {
    fn default() -> Self {
        let f = FeatureConfig::default();
        Self {
            coord_mode: f.mode,
            stationary_threshold_kmh: f.stationary_threshold_kmh,
            max_gap_s: f.max_gap_s,
            k_max: f.k_max,
            m_max: f.m_max,
            restarts: f.restarts,
            variance_floor: f.variance_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSettings {
    pub target: Target,
    pub scope: Scope,
    pub cv: CvScheme,
    pub nested_selection: bool,
    pub baseline: BaselineMode,
    pub selection_folds: usize,
    pub min_user_observations: usize,
}

impl Default for TaskSettings {
    fn default() -> Self {
        let t = TaskSpec::new(Target::Binary, Scope::Personal);
        Self {
            target: t.target,
            scope: t.scope,
            cv: t.cv,
            nested_selection: t.nested_selection,
            baseline: t.baseline,
            selection_folds: t.selection_folds,
            min_user_observations: t.min_user_observations,
        }
    }
}

impl TaskSettings {
    pub fn spec(&self) -> TaskSpec {
        TaskSpec {
            nested_selection: self.nested_selection,
            baseline: self.baseline,
            cv: self.cv,
            selection_folds: self.selection_folds,
            min_user_observations: self.min_user_observations,
            ..TaskSpec::new(self.target, self.scope)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSettings {
    /// Defaults to logistic regression for binary targets and elastic net
    /// for levels.
    pub kind: Option<LearnerKind>,
    /// Explicit candidate list; defaults to the built-in grid for `kind`.
    pub grid: Option<Vec<LearnerConfig>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationSettings {
    pub n_perm: usize,
    pub exact_limit: usize,
}

impl Default for PermutationSettings {
    fn default() -> Self {
        let o = EvalOptions::default();
        Self {
            n_perm: o.n_perm,
            exact_limit: o.exact_limit,
        }
    }
}

pub fn default_scale() -> LikertScale {
    LikertScale {
        min: 1,
        max: 5,
        threshold: 4.0,
        positive_direction: Direction::AtOrAbove,
    }
}

pub fn default_synth() -> CohortSpec {
    CohortSpec {
        n_users: 31,
        days_per_user: 60,
        target: TargetSpec::Binary { beta_a: 2.0, beta_b: 5.0 },
        features: FeatureSpec::Noise { d: 5 },
        seed: 0,
    }
}

/// Everything that determines a run. Parsed from TOML; every field has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in the summary table.
    pub dataset: String,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide. Results do not depend on it.
    pub threads: usize,
    pub paths: Paths,
    pub scale: LikertScale,
    pub filter: CohortFilter,
    pub geo: GeoSettings,
    pub task: TaskSettings,
    pub learner: LearnerSettings,
    pub permutation: PermutationSettings,
    /// Cohort for `synth`; its `seed` is replaced by the run seed.
    pub synth: CohortSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "unnamed".into(),
            seed: 0,
            threads: 0,
            paths: Paths::default(),
            scale: default_scale(),
            filter: CohortFilter::default(),
            geo: GeoSettings::default(),
            task: TaskSettings::default(),
            learner: LearnerSettings::default(),
            permutation: PermutationSettings::default(),
            synth: default_synth(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the config embedded in a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Input {
                path: path.to_path_buf(),
                message: format!("not a manifest: {e}"),
            })?;
            m.config.validate()?;
            return Ok(m.config);
        }
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |m: String| Err(PipelineError::Config(m));
        self.scale.validate()?;
        if self.filter.min_days == 0 {
            return cfg("filter.min_days must be positive".into());
        }
        // Negated comparisons so NaN is rejected too.
        if !(self.geo.stationary_threshold_kmh > 0.0) {
            return cfg("geo.stationary_threshold_kmh must be positive".into());
        }
        if !(self.geo.max_gap_s > 0.0) {
            return cfg("geo.max_gap_s must be positive".into());
        }
        if self.geo.k_max == 0 || self.geo.m_max == 0 || self.geo.restarts == 0 {
            return cfg("geo.k_max, geo.m_max and geo.restarts must be positive".into());
        }
        self.task.spec().validate().map_err(|e| PipelineError::Config(format!("task: {e}")))?;
        if self.permutation.n_perm == 0 {
            return cfg("permutation.n_perm must be positive".into());
        }
        if let Some(kind) = self.learner.kind {
            if kind.is_classifier() != (self.task.target == Target::Binary) {
                return cfg(format!("learner.kind {kind:?} does not fit task.target {:?}", self.task.target));
            }
        }
        if let Some(grid) = &self.learner.grid {
            if grid.is_empty() {
                return cfg("learner.grid is empty".into());
            }
            for c in grid {
                c.validate().map_err(|e| PipelineError::Config(format!("learner.grid: {e}")))?;
            }
        }
        self.synth.validate().map_err(|e| PipelineError::Config(format!("synth: {e}")))?;
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            mode: self.geo.coord_mode,
            stationary_threshold_kmh: self.geo.stationary_threshold_kmh,
            max_gap_s: self.geo.max_gap_s,
            k_max: self.geo.k_max,
            m_max: self.geo.m_max,
            restarts: self.geo.restarts,
            variance_floor: self.geo.variance_floor,
            seed: self.feature_seed(),
        }
    }

    pub fn feature_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    pub fn eval_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }

    pub fn synth_seed(&self) -> u64 {
        derive_seed(self.seed, 3)
    }

    pub fn learner_spec(&self) -> LearnerSpec {
        let kind = self.learner.kind.unwrap_or(match self.task.target {
            Target::Binary => LearnerKind::LogisticL2,
            Target::Level => LearnerKind::ElasticNet,
        });
        LearnerSpec::Grid(self.learner.grid.clone().unwrap_or_else(|| default_grid(kind)))
    }

    fn seeds(&self) -> BTreeMap<String, u64> {
        BTreeMap::from([
            ("master".to_string(), self.seed),
            ("features".to_string(), self.feature_seed()),
            ("evaluate".to_string(), self.eval_seed()),
            ("synth".to_string(), self.synth_seed()),
        ])
    }

    fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written next to every run's outputs, as `manifest.json` and as
/// `manifest.<command>.json`. Passing it back as `--config` reruns with
/// the same resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Tracks the files a stage reads and writes.
struct Run<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, PipelineError> {
        let out = cfg.out_dir();
        fs::create_dir_all(&out).map_err(|source| PipelineError::Output {
            path: out.clone(),
            source,
        })?;
        Ok(Self {
            cfg,
            out,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<(), PipelineError> {
        if !path.is_file() {
            return Err(PipelineError::Input {
                path: path.to_path_buf(),
                message: "file not found".into(),
            });
        }
        self.inputs.push(path.to_path_buf());
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<(BufWriter<File>, PathBuf), PipelineError> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| PipelineError::Output {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let f = File::create(&path).map_err(|source| PipelineError::Output {
            path: path.clone(),
            source,
        })?;
        self.outputs.push(path.clone());
        Ok((BufWriter::new(f), path))
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let (mut w, path) = self.create(name)?;
        w.write_all(bytes)
            .and_then(|_| w.flush())
            .map_err(|source| PipelineError::Output {
                path: path.clone(),
                source,
            })?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    fn finish(self, command: &str) -> Result<Manifest, PipelineError> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, PipelineError> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: p.clone(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = Manifest {
            tool: "userlift".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: self.cfg.hash(),
            seeds: self.cfg.seeds(),
            config: self.cfg.clone(),
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        bytes.push(b'\n');
        for name in ["manifest.json".to_string(), format!("manifest.{command}.json")] {
            let path = self.out.join(name);
            fs::write(&path, &bytes).map_err(|source| PipelineError::Output { path, source })?;
        }
        Ok(manifest)
    }
}

fn required<'p>(p: &'p Option<PathBuf>, field: &str) -> Result<&'p Path, PipelineError> {
    p.as_deref()
        .ok_or_else(|| PipelineError::Config(format!("paths.{field} is required for this command")))
}

/// Runs `f` on a pool with the configured number of threads.
pub fn with_threads<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Config(format!("threads: {e}")))?;
    pool.install(f)
}

pub struct IngestOutput {
    pub labels: Vec<DailyLabel>,
    pub samples: Vec<crate::ingest::LocationSample>,
    pub cohort: Cohort,
    pub dim: usize,
    pub warnings: Vec<String>,
}

fn load_inputs(run: &mut Run) -> Result<IngestOutput, PipelineError> {
    let cfg = run.cfg;
    let gps = required(&cfg.paths.gps, "gps")?.to_path_buf();
    let labels = required(&cfg.paths.labels, "labels")?.to_path_buf();
    run.input(&gps)?;
    run.input(&labels)?;
    let location = parse_location_csv(&gps, cfg.geo.coord_mode)?;
    let raw = parse_label_csv(&labels, &cfg.scale)?;
    let daily = binarize_all(&aggregate_daily(&raw), &cfg.scale);
    let cohort = cfg.filter.apply(&daily, &location.samples);
    let warnings = location.diagnostics.warnings().iter().map(|w| w.to_string()).collect();
    Ok(IngestOutput {
        labels: cohort.retain_labels(&daily),
        samples: cohort.retain_user_samples(&location.samples),
        cohort,
        dim: location.dim,
        warnings,
    })
}

fn write_labels(run: &mut Run, labels: &[DailyLabel]) -> Result<(), PipelineError> {
    let (w, _) = run.create("labels_daily.csv")?;
    write_daily_labels_csv(w, labels)?;
    Ok(())
}

/// Validates raw inputs, applies the eligibility filter and writes the
/// normalized tables.
pub fn run_ingest(cfg: &RunConfig) -> Result<(IngestOutput, Manifest), PipelineError> {
    let mut run = Run::new(cfg)?;
    let data = load_inputs(&mut run)?;
    write_labels(&mut run, &data.labels)?;
    let (w, _) = run.create("locations.csv")?;
    write_location_csv(w, &data.samples, data.dim)?;
    run.write_json("cohort.json", &data.cohort)?;
    Ok((data, run.finish("ingest")?))
}

pub struct FeaturesOutput {
    pub users: usize,
    pub rows: usize,
    pub warnings: Vec<String>,
}

/// Ingest plus per-user location models and daily features.
pub fn run_features(cfg: &RunConfig) -> Result<(FeaturesOutput, Manifest), PipelineError> {
    let mut run = Run::new(cfg)?;
    let data = load_inputs(&mut run)?;
    if data.cohort.is_empty() {
        return Err(PipelineError::NoEligibleUsers(format!(
            "no user has {} days with a label and at least {} location samples",
            cfg.filter.min_days, cfg.filter.min_gps_per_day
        )));
    }
    let (bundles, records) = extract_features(&data.samples, Some(&data.cohort), &cfg.feature_config())?;
    write_labels(&mut run, &data.labels)?;
    let rows: Vec<_> = records.iter().map(|r| r.to_row()).collect();
    let (w, _) = run.create("features.csv")?;
    write_feature_csv(w, &rows)?;
    for b in &bundles {
        run.write_json(&format!("bundles/{}.json", sanitize(&b.user_id)), b)?;
    }
    let out = FeaturesOutput {
        users: bundles.len(),
        rows: rows.len(),
        warnings: data.warnings,
    };
    Ok((out, run.finish("features")?))
}

/// File-name-safe form of a user id.
fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(|e| PipelineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads the feature and daily-label tables named by the config.
pub fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, Vec<PathBuf>, Vec<String>), PipelineError> {
    let out = cfg.out_dir();
    let features = cfg.paths.features.clone().unwrap_or_else(|| out.join("features.csv"));
    let labels = cfg.paths.daily_labels.clone().unwrap_or_else(|| out.join("labels_daily.csv"));
    let rows = read_feature_csv(open(&features)?).map_err(|e| PipelineError::Input {
        path: features.clone(),
        message: e.to_string(),
    })?;
    let daily = read_daily_labels_csv(open(&labels)?).map_err(|e| PipelineError::Input {
        path: labels.clone(),
        message: e.to_string(),
    })?;
    let (data, diag) = Dataset::from_tables(&rows, &daily, cfg.task.target).map_err(|e| PipelineError::Input {
        path: labels.clone(),
        message: e.to_string(),
    })?;
    let warnings = diag.warnings().iter().map(|w| w.to_string()).collect();
    Ok((data, vec![features, labels], warnings))
}

/// Cross-validates the configured learner and writes the report and the
/// box-plot quantiles.
pub fn run_evaluate(cfg: &RunConfig) -> Result<(EvalReport, Manifest), PipelineError> {
    let mut run = Run::new(cfg)?;
    let (data, inputs, _) = load_dataset(cfg)?;
    for p in &inputs {
        run.input(p)?;
    }
    let opts = EvalOptions {
        seed: cfg.eval_seed(),
        n_perm: cfg.permutation.n_perm,
        exact_limit: cfg.permutation.exact_limit,
    };
    let report = evaluate(&data, &cfg.learner_spec(), &cfg.task.spec(), &opts).map_err(|e| match e {
        EvalError::NoEligibleUsers { .. } => PipelineError::NoEligibleUsers(e.to_string()),
        other => PipelineError::Eval(other),
    })?;
    run.write_json("eval_report.json", &report)?;
    let mut q = Vec::new();
    write_quantiles_csv(&mut q, &report).map_err(|e| PipelineError::Output {
        path: run.out.join("quantiles.csv"),
        source: std::io::Error::other(e),
    })?;
    run.write_bytes("quantiles.csv", &q)?;
    Ok((report, run.finish("evaluate")?))
}

/// Writes a synthetic cohort as `features.csv`, `labels_daily.csv` and
/// `cohort_spec.json` (the spec with its analytic expectations).
pub fn run_synth(cfg: &RunConfig) -> Result<(CohortSpec, Manifest), PipelineError> {
    let mut run = Run::new(cfg)?;
    let spec = CohortSpec {
        seed: cfg.synth_seed(),
        ..cfg.synth
    };
    let cohort = generate_cohort(&spec)?;
    let (w, _) = run.create("features.csv")?;
    write_feature_csv(w, &cohort.features)?;
    write_labels(&mut run, &cohort.labels)?;
    #[derive(Serialize)]
    struct SpecFile {
        spec: CohortSpec,
        expected: crate::synth::OracleStats,
    }
    run.write_json(
        "cohort_spec.json",
        &SpecFile {
            spec,
            expected: analytic_oracle(&spec),
        },
    )?;
    Ok((spec, run.finish("synth")?))
}

/// Audits literature records and writes `audit.csv`.
pub fn run_audit(cfg: &RunConfig) -> Result<(usize, Manifest), PipelineError> {
    let mut run = Run::new(cfg)?;
    let studies = required(&cfg.paths.studies, "studies")?.to_path_buf();
    run.input(&studies)?;
    let records = read_study_records(open(&studies)?).map_err(|e| PipelineError::Input {
        path: studies.clone(),
        message: e.to_string(),
    })?;
    let rows = records
        .iter()
        .map(audit_study)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Input {
            path: studies.clone(),
            message: e.to_string(),
        })?;
    let mut bytes = Vec::new();
    write_audit_csv(&mut bytes, &rows)?;
    run.write_bytes("audit.csv", &bytes)?;
    Ok((rows.len(), run.finish("audit")?))
}

pub const TABLE_HEADER: [&str; 7] = [
    "Dataset",
    "Problem",
    "Model",
    "Avg. Personal Baseline Error",
    "Avg. Personal Model Error",
    "Avg. User Lift (Error)",
    "p-value",
];

/// `.481`-style p-value with three decimals; `<.001` below that.
pub fn format_p(p: f64) -> String {
    if p < 0.0005 {
        return "<.001".into();
    }
    let s = format!("{p:.3}");
    match s.strip_prefix('0') {
        Some(rest) => rest.to_string(),
        None => s,
    }
}

fn model_label(report: &EvalReport) -> String {
    match report.learner.as_str() {
        "logisticl2" => "Log.Reg.".into(),
        "elasticnet" => "Elastic Net".into(),
        "lasso" => "Lasso".into(),
        other => other.to_string(),
    }
}

/// One Markdown table row per report.
pub fn render_table(rows: &[(String, EvalReport)]) -> String {
    let mut s = format!("| {} |\n", TABLE_HEADER.join(" | "));
    s.push_str(&format!("|{}\n", "---|".repeat(TABLE_HEADER.len())));
    for (dataset, r) in rows {
        let (problem, unit) = match r.task.target {
            Target::Binary => ("binary", "%"),
            Target::Level => ("regression", ""),
        };
        let err = |v: f64| format!("{v:.2}{unit}");
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {:.2} | {} |\n",
            dataset,
            problem,
            model_label(r),
            err(r.average_personal_baseline_error),
            err(r.average_model_error),
            r.average_lift,
            format_p(r.p_value)
        ));
    }
    s
}

/// Renders `table1.md` from one or more evaluation reports (default:
/// `<out>/eval_report.json`).
pub fn run_report(cfg: &RunConfig, reports: &[PathBuf]) -> Result<(String, Manifest), PipelineError> {
    let mut run = Run::new(cfg)?;
    let default = [run.out.join("eval_report.json")];
    let paths = if reports.is_empty() { &default[..] } else { reports };
    let mut rows = Vec::new();
    for p in paths {
        run.input(p)?;
        let r: EvalReport = serde_json::from_reader(open(p)?).map_err(|e| PipelineError::Input {
            path: p.clone(),
            message: format!("not an evaluation report: {e}"),
        })?;
        rows.push((cfg.dataset.clone(), r));
    }
    let table = render_table(&rows);
    run.write_bytes("table1.md", table.as_bytes())?;
    Ok((table, run.finish("report")?))
}
