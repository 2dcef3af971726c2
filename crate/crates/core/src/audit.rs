//! Arithmetic for auditing published results: baselines implied by a
//! confusion matrix, the uniform-reporting baseline, and errors scaled by
//! the majority-class error.
//!
//! All errors and accuracies in this module are fractions in `[0, 1]`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("confusion matrix must be square with at least 2 classes")]
    NotSquare,
    #[error("confusion matrix has no observations")]
    Empty,
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("study {study}: {message}")]
    Record { study: String, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Rows are the true class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self, AuditError> {
        let k = counts.len();
        if k < 2 || counts.iter().any(|r| r.len() != k) {
            return Err(AuditError::NotSquare);
        }
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(AuditError::Empty);
        }
        Ok(Self { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }
}

impl TryFrom<Vec<Vec<u64>>> for ConfusionMatrix {
    type Error = AuditError;
    fn try_from(v: Vec<Vec<u64>>) -> Result<Self, AuditError> {
        Self::new(v)
    }
}

impl From<ConfusionMatrix> for Vec<Vec<u64>> {
    fn from(m: ConfusionMatrix) -> Self {
        m.counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionBaseline {
    /// Accuracy of always guessing the most common true class.
    pub baseline_accuracy: f64,
    pub baseline_error: f64,
    pub model_accuracy: f64,
    pub model_error: f64,
}

pub fn baseline_from_confusion(m: &ConfusionMatrix) -> ConfusionBaseline {
    let total = m.total() as f64;
    let majority = m.counts.iter().map(|r| r.iter().sum::<u64>()).max().unwrap_or(0) as f64;
    let trace: u64 = (0..m.k()).map(|i| m.counts[i][i]).sum();
    let trace = trace as f64;
    // Errors from counts rather than `1 - accuracy`, so 20/100 prints as 0.2.
    ConfusionBaseline {
        baseline_accuracy: majority / total,
        baseline_error: (total - majority) / total,
        model_accuracy: trace / total,
        model_error: (total - trace) / total,
    }
}

/// Error of guessing when every one of `k` states is reported equally often.
pub fn uniform_baseline(k: usize) -> Result<f64, AuditError> {
    if k < 2 {
        return Err(AuditError::TooFewClasses(k));
    }
    Ok(1.0 - 1.0 / k as f64)
}

/// `error / majority_baseline_error`: 1 means no better than guessing the
/// majority class, below 1 better. `None` when the baseline error is not
/// positive.
pub fn scale_error_by_imbalance(error: f64, majority_baseline_error: f64) -> Option<f64> {
    (majority_baseline_error > 0.0 && majority_baseline_error.is_finite()).then(|| error / majority_baseline_error)
}

/// Arithmetic mean of per-user baseline values.
pub fn average_user_baseline(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// A study as reported in the literature. A confusion matrix, when given,
/// takes precedence over reported errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub k_classes: usize,
    #[serde(default)]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default)]
    pub reported_error: Option<f64>,
    #[serde(default)]
    pub baseline_error: Option<f64>,
}

pub const SCALING_NOTE: &str = "scaled_error = model_error / majority_baseline_error (interpretation)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub study_id: String,
    pub k_classes: usize,
    pub uniform_baseline_error: f64,
    pub majority_baseline_error: Option<f64>,
    pub model_error: Option<f64>,
    /// `majority_baseline_error - model_error`.
    pub lift: Option<f64>,
    pub scaled_error: Option<f64>,
    pub scaling_note: String,
}

fn check_fraction(study: &str, name: &str, v: Option<f64>) -> Result<(), AuditError> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(AuditError::Record {
            study: study.to_string(),
            message: format!("{name} = {x} is not a fraction in [0, 1]"),
        }),
        _ => Ok(()),
    }
}

pub fn audit_study(r: &StudyRecord) -> Result<AuditRow, AuditError> {
    let uniform = uniform_baseline(r.k_classes).map_err(|e| AuditError::Record {
        study: r.study_id.clone(),
        message: e.to_string(),
    })?;
    check_fraction(&r.study_id, "reported_error", r.reported_error)?;
    check_fraction(&r.study_id, "baseline_error", r.baseline_error)?;
    let (baseline, model) = match &r.confusion {
        Some(m) => {
            if m.k() != r.k_classes {
                return Err(AuditError::Record {
                    study: r.study_id.clone(),
                    message: format!("confusion matrix has {} classes, k_classes = {}", m.k(), r.k_classes),
                });
            }
            let b = baseline_from_confusion(m);
            (Some(b.baseline_error), Some(b.model_error))
        }
        None => (r.baseline_error, r.reported_error),
    };
    Ok(AuditRow {
        study_id: r.study_id.clone(),
        k_classes: r.k_classes,
        uniform_baseline_error: uniform,
        majority_baseline_error: baseline,
        model_error: model,
        lift: baseline.zip(model).map(|(b, m)| b - m),
        scaled_error: baseline.zip(model).and_then(|(b, m)| scale_error_by_imbalance(m, b)),
        scaling_note: SCALING_NOTE.to_string(),
    })
}

pub fn read_study_records<R: Read>(input: R) -> Result<Vec<StudyRecord>, AuditError> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_audit_csv<W: Write>(out: W, rows: &[AuditRow]) -> Result<(), AuditError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
