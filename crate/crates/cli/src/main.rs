use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use userlift::eval::{CvScheme, Scope, Target};
use userlift::pipeline::{self, PipelineError, RunConfig};
use userlift::synth::{FeatureSpec, TargetSpec};

#[derive(Parser)]
#[command(name = "userlift", version, about = "Per-user baselines and user lift for mood prediction from location data")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    scope: Option<ScopeArg>,
    #[arg(long, global = true, value_enum)]
    target: Option<TargetArg>,
    /// `loo` or `kfold:<k>`.
    #[arg(long, global = true)]
    cv: Option<CvScheme>,
    /// Select hyperparameters inside every outer fold.
    #[arg(long, global = true)]
    nested: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    dataset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Population,
    Personal,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Binary,
    Level,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw location and label files and write normalized tables.
    Ingest(RawInputs),
    /// Fit per-user location models and write daily features.
    Features(RawInputs),
    /// Cross-validate a learner against personal baselines.
    Evaluate {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        daily_labels: Option<PathBuf>,
    },
    /// Baselines implied by published confusion matrices and error rates.
    Audit {
        /// JSON array of study records.
        #[arg(long)]
        studies: Option<PathBuf>,
    },
    /// Generate a synthetic cohort with known parameters.
    Synth(SynthArgs),
    /// Render evaluation reports as a Markdown table.
    Report {
        /// Reports to include (default: <out>/eval_report.json).
        reports: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RawInputs {
    #[arg(long)]
    gps: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    beta_a: Option<f64>,
    #[arg(long)]
    beta_b: Option<f64>,
    #[arg(long)]
    sigma_between: Option<f64>,
    #[arg(long)]
    sigma_within: Option<f64>,
    /// Number of feature columns.
    #[arg(long)]
    features: Option<usize>,
    /// Strength of the first feature's effect; 0 for pure noise.
    #[arg(long)]
    signal: Option<f64>,
}

fn apply_synth(cfg: &mut RunConfig, a: &SynthArgs, target: Option<TargetArg>) {
    let s = &mut cfg.synth;
    s.n_users = a.users.unwrap_or(s.n_users);
    s.days_per_user = a.days.unwrap_or(s.days_per_user);
    s.target = match (target, s.target) {
        (Some(TargetArg::Level), TargetSpec::Binary { .. }) => TargetSpec::Level {
            sigma_between: 1.0,
            sigma_within: 0.3,
        },
        (Some(TargetArg::Binary), TargetSpec::Level { .. }) => TargetSpec::Binary { beta_a: 2.0, beta_b: 5.0 },
        (_, t) => t,
    };
    match &mut s.target {
        TargetSpec::Binary { beta_a, beta_b } => {
            *beta_a = a.beta_a.unwrap_or(*beta_a);
            *beta_b = a.beta_b.unwrap_or(*beta_b);
        }
        TargetSpec::Level {
            sigma_between,
            sigma_within,
        } => {
            *sigma_between = a.sigma_between.unwrap_or(*sigma_between);
            *sigma_within = a.sigma_within.unwrap_or(*sigma_within);
        }
    }
    let d = a.features.unwrap_or(s.features.d());
    let signal = a.signal.unwrap_or(s.features.signal());
    s.features = if signal == 0.0 {
        FeatureSpec::Noise { d }
    } else {
        FeatureSpec::Informative { d, signal_strength: signal }
    };
}

fn resolve(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(s) = g.scope {
        cfg.task.scope = match s {
            ScopeArg::Population => Scope::Population,
            ScopeArg::Personal => Scope::Personal,
        };
    }
    if let Some(t) = g.target {
        let t = match t {
            TargetArg::Binary => Target::Binary,
            TargetArg::Level => Target::Level,
        };
        if t != cfg.task.target {
            cfg.task.target = t;
            cfg.learner = Default::default();
        }
    }
    if let Some(cv) = g.cv {
        cfg.task.cv = cv;
    }
    if g.nested {
        cfg.task.nested_selection = true;
    }
    if let Some(o) = &g.out {
        cfg.paths.out = Some(o.clone());
    }
    if let Some(t) = g.threads {
        cfg.threads = t;
    }
    if let Some(d) = &g.dataset {
        cfg.dataset = d.clone();
    }
    match &cli.command {
        Command::Ingest(r) | Command::Features(r) => {
            cfg.paths.gps = r.gps.clone().or(cfg.paths.gps);
            cfg.paths.labels = r.labels.clone().or(cfg.paths.labels);
        }
        Command::Evaluate { features, daily_labels } => {
            cfg.paths.features = features.clone().or(cfg.paths.features);
            cfg.paths.daily_labels = daily_labels.clone().or(cfg.paths.daily_labels);
        }
        Command::Audit { studies } => cfg.paths.studies = studies.clone().or(cfg.paths.studies),
        Command::Synth(a) => apply_synth(&mut cfg, a, g.target),
        Command::Report { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = resolve(cli)?;
    let out = cfg.out_dir();
    pipeline::with_threads(cfg.threads, || {
        match &cli.command {
            Command::Ingest(_) => {
                let (data, _) = pipeline::run_ingest(&cfg)?;
                for w in &data.warnings {
                    eprintln!("warning: {w}");
                }
                println!(
                    "{} eligible users, {} labeled days -> {}",
                    data.cohort.days.len(),
                    data.labels.len(),
                    out.display()
                );
            }
            Command::Features(_) => {
                let (f, _) = pipeline::run_features(&cfg)?;
                for w in &f.warnings {
                    eprintln!("warning: {w}");
                }
                println!("{} users, {} feature rows -> {}", f.users, f.rows, out.display());
            }
            Command::Evaluate { .. } => {
                let (r, _) = pipeline::run_evaluate(&cfg)?;
                for w in r.warnings.warnings() {
                    eprintln!("warning: {w}");
                }
                println!(
                    "{} users: personal baseline {:.4}, model {:.4}, average lift {:.4}, p = {}",
                    r.n_users,
                    r.average_personal_baseline_error,
                    r.average_model_error,
                    r.average_lift,
                    pipeline::format_p(r.p_value)
                );
            }
            Command::Audit { .. } => {
                let (n, _) = pipeline::run_audit(&cfg)?;
                println!("{n} studies -> {}", out.join("audit.csv").display());
            }
            Command::Synth(_) => {
                let (spec, _) = pipeline::run_synth(&cfg)?;
                println!(
                    "{} users x {} days -> {}",
                    spec.n_users,
                    spec.days_per_user,
                    out.display()
                );
            }
            Command::Report { reports } => {
                let (table, _) = pipeline::run_report(&cfg, reports)?;
                print!("{table}");
            }
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
