//! Reading location and label streams, daily aggregation, thresholding and
//! cohort eligibility.

mod cohort;
mod labels;
mod location;

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub use cohort::{filter_cohort, Cohort, CohortFilter};
pub use labels::{
    aggregate_daily, binarize, binarize_all, parse_label_csv, read_daily_labels_csv,
    write_daily_labels_csv, DailyLabel, Direction, LabelObservation, LikertScale,
};
pub use location::{
    parse_location_csv, write_location_csv, CoordMode, LocationData, LocationSample,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row} (line {line}): {message}")]
    Validation { row: usize, line: u64, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Calendar day of a pre-localized timestamp (seconds since epoch).
pub fn day_of(timestamp: f64) -> NaiveDate {
    let days = (timestamp / SECONDS_PER_DAY).floor() as i64;
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch") + chrono::Duration::days(days)
}

/// Seconds elapsed since local midnight, in `[0, 86400)`.
pub fn seconds_of_day(timestamp: f64) -> f64 {
    timestamp.rem_euclid(SECONDS_PER_DAY)
}
