use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{day_of, IngestError};

/// Which side of the threshold counts as the positive state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtOrAbove,
    AtOrBelow,
}

/// A Likert response scale and the threshold used to binarize daily levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikertScale {
    pub min: i32,
    pub max: i32,
    pub threshold: f64,
    pub positive_direction: Direction,
}

impl LikertScale {
    pub fn new(
        min: i32,
        max: i32,
        threshold: f64,
        positive_direction: Direction,
    ) -> Result<Self, IngestError> {
        let scale = Self {
            min,
            max,
            threshold,
            positive_direction,
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.min >= self.max {
            return Err(IngestError::Config(format!(
                "scale.min ({}) must be below scale.max ({})",
                self.min, self.max
            )));
        }
        if !(f64::from(self.min)..=f64::from(self.max)).contains(&self.threshold) {
            return Err(IngestError::Config(format!(
                "scale.threshold ({}) lies outside [{}, {}]",
                self.threshold, self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= f64::from(self.min) && value <= f64::from(self.max)
    }

    /// Inclusive threshold comparison.
    pub fn is_positive(&self, level: f64) -> bool {
        match self.positive_direction {
            Direction::AtOrAbove => level >= self.threshold,
            Direction::AtOrBelow => level <= self.threshold,
        }
    }
}

/// A single raw self-report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelObservation {
    pub user_id: String,
    pub timestamp: f64,
    pub value: f64,
}

/// Mean of one user's responses on one calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyLabel {
    pub user_id: String,
    pub date: NaiveDate,
    pub level: f64,
    pub binary: Option<bool>,
}

/// Reads `user_id,timestamp,value` rows and checks every value against the scale.
pub fn parse_label_csv(
    path: &Path,
    scale: &LikertScale,
) -> Result<Vec<LabelObservation>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_label_reader(file, scale)
}

pub(crate) fn parse_label_reader<R: std::io::Read>(
    reader: R,
    scale: &LikertScale,
) -> Result<Vec<LabelObservation>, IngestError> {
    scale.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Schema(format!("missing column `{name}`")))
    };
    let (cu, ct, cv) = (col("user_id")?, col("timestamp")?, col("value")?);

    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let number = |idx: usize, what: &str| -> Result<f64, IngestError> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::Parse {
                    line,
                    message: format!("{what} `{raw}` is not a finite number"),
                })
        };
        let timestamp = number(ct, "timestamp")?;
        let value = number(cv, "value")?;
        if !scale.contains(value) {
            return Err(IngestError::Validation {
                row,
                line,
                message: format!(
                    "value {value} outside the scale [{}, {}]",
                    scale.min, scale.max
                ),
            });
        }
        out.push(LabelObservation {
            user_id: record.get(cu).unwrap_or("").to_string(),
            timestamp,
            value,
        });
    }
    Ok(out)
}

/// Averages each user's responses per calendar day.
///
/// Output is ordered by `(user_id, date)`; `binary` is left unset.
pub fn aggregate_daily(labels: &[LabelObservation]) -> Vec<DailyLabel> {
    let mut groups: BTreeMap<(&str, NaiveDate), (f64, usize)> = BTreeMap::new();
    for obs in labels {
        let entry = groups
            .entry((obs.user_id.as_str(), day_of(obs.timestamp)))
            .or_insert((0.0, 0));
        entry.0 += obs.value;
        entry.1 += 1;
    }
    groups
        .into_iter()
        .map(|((user, date), (sum, count))| DailyLabel {
            user_id: user.to_string(),
            date,
            level: sum / count as f64,
            binary: None,
        })
        .collect()
}

pub fn binarize(daily: &DailyLabel, scale: &LikertScale) -> DailyLabel {
    DailyLabel {
        binary: Some(scale.is_positive(daily.level)),
        ..daily.clone()
    }
}

pub fn binarize_all(daily: &[DailyLabel], scale: &LikertScale) -> Vec<DailyLabel> {
    daily.iter().map(|d| binarize(d, scale)).collect()
}

/// Writes the normalized daily label table (`user_id,date,level,binary`).
pub fn write_daily_labels_csv<W: Write>(out: W, labels: &[DailyLabel]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["user_id", "date", "level", "binary"])?;
    for d in labels {
        let binary = match d.binary {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        wtr.write_record([
            d.user_id.as_str(),
            &d.date.to_string(),
            &d.level.to_string(),
            binary,
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_daily_labels_csv<R: std::io::Read>(reader: R) -> Result<Vec<DailyLabel>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["user_id", "date", "level", "binary"] {
        if !headers.iter().any(|h| h == required) {
            return Err(IngestError::Schema(format!("missing column `{required}`")));
        }
    }
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (cu, cd, cl, cb) = (idx("user_id"), idx("date"), idx("level"), idx("binary"));
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| IngestError::Parse { line, message };
        let date = record
            .get(cd)
            .unwrap_or("")
            .parse::<NaiveDate>()
            .map_err(|e| err(format!("bad date: {e}")))?;
        let level = record
            .get(cl)
            .unwrap_or("")
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err("level is not a finite number".into()))?;
        let binary = match record.get(cb).unwrap_or("") {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => return Err(err(format!("binary flag `{other}` is not 0/1"))),
        };
        out.push(DailyLabel {
            user_id: record.get(cu).unwrap_or("").to_string(),
            date,
            level,
            binary,
        });
    }
    Ok(out)
}
