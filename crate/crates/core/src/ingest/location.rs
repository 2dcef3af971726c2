use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::diagnostics::Diagnostics;

/// How coordinates are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordMode {
    /// `x` is latitude and `y` is longitude, both in degrees.
    Geodetic,
    /// Arbitrary planar units, treated as meters for speed computations.
    Planar,
}

/// One timestamped location observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSample {
    pub user_id: String,
    /// Seconds since epoch, already shifted to local time.
    pub timestamp: f64,
    pub coords: Vec<f64>,
    pub stationary: Option<bool>,
}

/// Parsed location stream plus anything noteworthy found while reading it.
#[derive(Debug, Clone)]
pub struct LocationData {
    pub samples: Vec<LocationSample>,
    pub dim: usize,
    pub mode: CoordMode,
    pub duplicates: usize,
    pub diagnostics: Diagnostics,
}

struct Columns {
    user: usize,
    timestamp: usize,
    x: usize,
    y: Option<usize>,
    stationary: Option<usize>,
}

fn locate_columns(headers: &csv::StringRecord) -> Result<Columns, IngestError> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| IngestError::Schema(format!("missing column `{name}`")))
    };
    Ok(Columns {
        user: required("user_id")?,
        timestamp: required("timestamp")?,
        x: required("x")?,
        y: find("y"),
        stationary: find("stationary"),
    })
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

fn parse_finite(raw: &str, what: &str, line: u64) -> Result<f64, IngestError> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::Parse {
            line,
            message: format!("{what} `{raw}` is not a finite number"),
        }),
    }
}

/// Reads a headered `user_id,timestamp,x[,y][,stationary]` file.
///
/// Rows come back sorted by `(user_id, timestamp)`. When several rows share a
/// user and timestamp only the first one in file order is kept and a
/// `duplicate_timestamp` warning is recorded for each dropped row.
pub fn parse_location_csv(path: &Path, mode: CoordMode) -> Result<LocationData, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_location_reader(file, mode)
}

pub(crate) fn parse_location_reader<R: std::io::Read>(
    reader: R,
    mode: CoordMode,
) -> Result<LocationData, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = locate_columns(&headers)?;
    let dim = if cols.y.is_some() { 2 } else { 1 };
    if mode == CoordMode::Geodetic && dim != 2 {
        return Err(IngestError::Schema(
            "geodetic mode needs both `x` (latitude) and `y` (longitude) columns".into(),
        ));
    }

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let user_id = field(cols.user).to_string();
        if user_id.is_empty() {
            return Err(IngestError::Parse {
                line,
                message: "empty user_id".into(),
            });
        }
        let timestamp = parse_finite(field(cols.timestamp), "timestamp", line)?;
        let mut coords = vec![parse_finite(field(cols.x), "coordinate x", line)?];
        if let Some(y) = cols.y {
            let raw = field(y);
            if raw.is_empty() {
                return Err(IngestError::Schema(format!(
                    "line {line}: row has 1 coordinate but the file declares 2 (mixed dimensionality)"
                )));
            }
            coords.push(parse_finite(raw, "coordinate y", line)?);
        } else if record.len() > headers.len() {
            return Err(IngestError::Schema(format!(
                "line {line}: row has more fields than the header declares (mixed dimensionality)"
            )));
        }
        if mode == CoordMode::Geodetic {
            let (lat, lon) = (coords[0], coords[1]);
            if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                return Err(IngestError::Parse {
                    line,
                    message: format!("({lat}, {lon}) is not a valid latitude/longitude"),
                });
            }
        }
        let stationary = match cols.stationary.map(field) {
            None | Some("") => None,
            Some(raw) => Some(parse_bool(raw).ok_or_else(|| IngestError::Parse {
                line,
                message: format!("stationary flag `{raw}` is not a boolean"),
            })?),
        };
        samples.push(LocationSample {
            user_id,
            timestamp,
            coords,
            stationary,
        });
    }

    // Stable sort keeps file order among equal keys, so dedup keeps the first.
    samples.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.total_cmp(&b.timestamp))
    });
    let before = samples.len();
    let mut diagnostics = Diagnostics::new();
    samples.dedup_by(|later, kept| {
        let dup = later.user_id == kept.user_id && later.timestamp == kept.timestamp;
        if dup {
            diagnostics.warn(
                "duplicate_timestamp",
                format!("user={} timestamp={}", later.user_id, later.timestamp),
            );
        }
        dup
    });
    let duplicates = before - samples.len();

    Ok(LocationData {
        samples,
        dim,
        mode,
        duplicates,
        diagnostics,
    })
}

/// Writes samples back out in the same schema `parse_location_csv` reads.
pub fn write_location_csv<W: Write>(
    out: W,
    samples: &[LocationSample],
    dim: usize,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["user_id", "timestamp", "x"];
    if dim == 2 {
        header.push("y");
    }
    header.push("stationary");
    wtr.write_record(&header)?;
    for s in samples {
        let mut row = vec![s.user_id.clone(), s.timestamp.to_string()];
        row.extend(s.coords.iter().map(|c| c.to_string()));
        row.push(match s.stationary {
            Some(true) => "true".into(),
            Some(false) => "false".into(),
            None => String::new(),
        });
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
