use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;

use super::{CohortSpec, TargetSpec};

/// Expected baseline statistics of a cohort, in evaluation units (percent
/// for binary targets, label units for levels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleStats {
    pub personal_baseline_error: f64,
    pub population_baseline_error: f64,
    /// Level targets only.
    pub variance_explained: Option<f64>,
    /// Error of the best possible predictor that knows each user's
    /// parameter and the features: percent misclassified for binary
    /// targets, RMSE for levels.
    pub bayes_error: f64,
}

const U_NODES: usize = 2000;
const X_NODES: usize = 801;

/// Midpoint nodes on [-8, 8] with normalized standard-normal weights.
fn normal_nodes() -> Vec<(f64, f64)> {
    let h = 16.0 / X_NODES as f64;
    let raw: Vec<(f64, f64)> = (0..X_NODES)
        .map(|i| {
            let x = -8.0 + (i as f64 + 0.5) * h;
            (x, (-0.5 * x * x).exp())
        })
        .collect();
    let total: f64 = raw.iter().map(|r| r.1).sum();
    raw.into_iter().map(|(x, w)| (x, w / total)).collect()
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `E[min(p, 1 - p)]` for `p ~ Beta(a, b)`, from the incomplete beta
/// function.
fn expected_minority_rate(a: f64, b: f64) -> f64 {
    let m = a / (a + b);
    m * beta_reg(a + 1.0, b, 0.5) + (1.0 - m) * (1.0 - beta_reg(a, b + 1.0, 0.5))
}

/// Expected in-sample error, in percent, of guessing the mode of `n`
/// Bernoulli(p) labels with `p ~ Beta(a, b)`. Smaller than the asymptotic
/// value because the mode is fit to the same labels it is scored on.
pub fn beta_binomial_mode_error(a: f64, b: f64, n: usize) -> f64 {
    let nf = n as f64;
    let lnc = ln_gamma(nf + 1.0) - ln_beta(a, b);
    100.0
        * (0..=n)
            .map(|k| {
                let kf = k as f64;
                let lp = lnc - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + ln_beta(kf + a, nf - kf + b);
                lp.exp() * kf.min(nf - kf) / nf
            })
            .sum::<f64>()
}

pub fn analytic_oracle(spec: &CohortSpec) -> OracleStats {
    let s = spec.features.signal();
    match spec.target {
        TargetSpec::Binary { beta_a, beta_b } if s == 0.0 => {
            let r = beta_a / (beta_a + beta_b);
            let personal = expected_minority_rate(beta_a, beta_b);
            OracleStats {
                personal_baseline_error: 100.0 * personal,
                population_baseline_error: 100.0 * r.min(1.0 - r),
                variance_explained: None,
                bayes_error: 100.0 * personal,
            }
        }
        TargetSpec::Binary { beta_a, beta_b } => {
            let xs = normal_nodes();
            let (mut personal, mut rate, mut bayes) = (0.0, 0.0, 0.0);
            for i in 0..U_NODES {
                let u = (i as f64 + 0.5) / U_NODES as f64;
                let p = inv_beta_reg(beta_a, beta_b, u).clamp(1e-12, 1.0 - 1e-12);
                let base = (p / (1.0 - p)).ln();
                let (mut m, mut best) = (0.0, 0.0);
                for &(x, w) in &xs {
                    let q = sigmoid(base + s * x);
                    m += w * q;
                    best += w * q.min(1.0 - q);
                }
                personal += m.min(1.0 - m);
                rate += m;
                bayes += best;
            }
            let n = U_NODES as f64;
            let r = rate / n;
            OracleStats {
                personal_baseline_error: 100.0 * personal / n,
                population_baseline_error: 100.0 * r.min(1.0 - r),
                variance_explained: None,
                bayes_error: 100.0 * bayes / n,
            }
        }
        TargetSpec::Level {
            sigma_between,
            sigma_within,
        } => {
            let within = sigma_within * sigma_within + s * s;
            let between = sigma_between * sigma_between;
            let n = spec.days_per_user as f64;
            OracleStats {
                personal_baseline_error: (within * (n - 1.0) / n).sqrt(),
                population_baseline_error: (between + within).sqrt(),
                variance_explained: (between + within > 0.0).then(|| between / (between + within)),
                bayes_error: sigma_within,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::FeatureSpec;

    fn spec(target: TargetSpec, features: FeatureSpec, days: usize) -> CohortSpec {
        CohortSpec {
            n_users: 10,
            days_per_user: days,
            target,
            features,
            seed: 0,
        }
    }

    /// Crude midpoint integral of `min(p, 1-p)` against the Beta density.
    fn midpoint_minority(a: f64, b: f64) -> f64 {
        let n = 200_000;
        let norm = ln_beta(a, b);
        (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                let dens = ((a - 1.0) * p.ln() + (b - 1.0) * (1.0 - p).ln() - norm).exp();
                p.min(1.0 - p) * dens / n as f64
            })
            .sum()
    }

    #[test]
    fn minority_rate_matches_direct_integration() {
        for (a, b) in [(1.0, 1.0), (2.0, 5.0), (3.0, 3.0), (5.0, 1.5)] {
            assert!((expected_minority_rate(a, b) - midpoint_minority(a, b)).abs() < 1e-6);
        }
        assert!((expected_minority_rate(1.0, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn level_formulas() {
        let o = analytic_oracle(&spec(
            TargetSpec::Level {
                sigma_between: 1.0,
                sigma_within: 0.3,
            },
            FeatureSpec::Noise { d: 1 },
            60,
        ));
        assert!((o.population_baseline_error - 1.044).abs() < 1e-3);
        assert!((o.personal_baseline_error - 0.3 * (59.0f64 / 60.0).sqrt()).abs() < 1e-12);
        let o = analytic_oracle(&spec(
            TargetSpec::Level {
                sigma_between: 1.0,
                sigma_within: 0.43,
            },
            FeatureSpec::Noise { d: 1 },
            60,
        ));
        assert!((o.variance_explained.unwrap() - 0.844).abs() < 1e-3);
    }

    #[test]
    fn symmetric_beta_population_error_is_half() {
        let o = analytic_oracle(&spec(
            TargetSpec::Binary { beta_a: 1.0, beta_b: 1.0 },
            FeatureSpec::Noise { d: 1 },
            60,
        ));
        assert_eq!(o.population_baseline_error, 50.0);
    }

    #[test]
    fn informative_with_zero_signal_matches_noise() {
        let t = TargetSpec::Binary { beta_a: 2.0, beta_b: 5.0 };
        let a = analytic_oracle(&spec(t, FeatureSpec::Noise { d: 1 }, 60));
        let b = analytic_oracle(&spec(t, FeatureSpec::Informative { d: 1, signal_strength: 1e-9 }, 60));
        assert!((a.personal_baseline_error - b.personal_baseline_error).abs() < 0.05);
        assert!((a.population_baseline_error - b.population_baseline_error).abs() < 1e-3);
    }

    #[test]
    fn strong_signal_lowers_bayes_error() {
        let t = TargetSpec::Binary { beta_a: 2.0, beta_b: 5.0 };
        let o = analytic_oracle(&spec(t, FeatureSpec::Informative { d: 3, signal_strength: 4.0 }, 60));
        assert!(o.bayes_error < 15.0);
        assert!(o.bayes_error < o.personal_baseline_error);
    }

    #[test]
    fn finite_mode_error_approaches_asymptote() {
        let asym = 100.0 * expected_minority_rate(2.0, 5.0);
        let e60 = beta_binomial_mode_error(2.0, 5.0, 60);
        let e2000 = beta_binomial_mode_error(2.0, 5.0, 2000);
        assert!(e60 < e2000 && e2000 < asym);
        assert!((asym - e2000) < 0.1);
        // Single day: always right.
        assert!(beta_binomial_mode_error(2.0, 5.0, 1).abs() < 1e-12);
    }
}
