//! The feature table shared by feature extraction, synthetic cohorts and
//! evaluation: `user_id,date,f1..fd,m1..md`, where `m<i>` is 1 when feature
//! `i` is missing (its value cell is then empty).

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub user_id: String,
    pub date: NaiveDate,
    pub values: Vec<Option<f64>>,
}

pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<(), TableError> {
    let d = rows.first().map_or(0, |r| r.values.len());
    if rows.iter().any(|r| r.values.len() != d) {
        return Err(TableError::Schema("rows have differing feature counts".into()));
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["user_id".to_string(), "date".to_string()];
    header.extend((1..=d).map(|i| format!("f{i}")));
    header.extend((1..=d).map(|i| format!("m{i}")));
    wtr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.user_id.clone(), r.date.to_string()];
        rec.extend(r.values.iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
        rec.extend(r.values.iter().map(|v| if v.is_some() { "0" } else { "1" }.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureRow>, TableError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 2 || names[0] != "user_id" || names[1] != "date" {
        return Err(TableError::Schema("expected leading columns user_id,date".into()));
    }
    let rest = names.len() - 2;
    if !rest.is_multiple_of(2) {
        return Err(TableError::Schema("feature and mask columns are unbalanced".into()));
    }
    let d = rest / 2;
    for i in 0..d {
        if names[2 + i] != format!("f{}", i + 1) || names[2 + d + i] != format!("m{}", i + 1) {
            return Err(TableError::Schema(format!("column {} is not f{}/m{}", 3 + i, i + 1, i + 1)));
        }
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| TableError::Parse { line, message };
        let date = record[1]
            .parse::<NaiveDate>()
            .map_err(|e| err(format!("bad date `{}`: {e}", &record[1])))?;
        let mut values = Vec::with_capacity(d);
        for i in 0..d {
            let missing = match &record[2 + d + i] {
                "1" => true,
                "0" => false,
                other => return Err(err(format!("mask m{} is `{other}`, expected 0 or 1", i + 1))),
            };
            let raw = &record[2 + i];
            values.push(if missing {
                None
            } else {
                Some(
                    raw.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(format!("f{} `{raw}` is not a finite number", i + 1)))?,
                )
            });
        }
        rows.push(FeatureRow {
            user_id: record[0].to_string(),
            date,
            values,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(
            ("[a-z]{1,4}", 0i64..1000, prop::collection::vec(prop::option::of(-1e9f64..1e9), 3)),
            0..20,
        )) {
            let rows: Vec<FeatureRow> = rows
                .into_iter()
                .map(|(u, d, values)| FeatureRow {
                    user_id: u,
                    date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(d),
                    values,
                })
                .collect();
            let mut buf = Vec::new();
            write_feature_csv(&mut buf, &rows).unwrap();
            let back = read_feature_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }

    #[test]
    fn rejects_bad_mask() {
        let text = "user_id,date,f1,m1\nu,2020-01-01,1.0,2\n";
        assert!(matches!(read_feature_csv(text.as_bytes()), Err(TableError::Parse { line: 2, .. })));
    }
}
