//! CSV ingestion: header-driven parsing, timestamp ordering and duplicate
//! rejection, missing-cell flagging, and CSV export for round trips.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::faults::{self, FaultId};
use crate::series::{Column, FeatureTable, Timestamp};

/// Column mapping for `load_csv`: which header is the time axis and which
/// is the forecasting target.
#[derive(Debug, Clone)]
pub struct CsvSpec {
    pub timestamp_column: String,
    pub target_column: String,
}

/// One parsed row before ordering: its timestamp plus one optional value per
/// feature column.
pub type Row = (Timestamp, Vec<Option<f64>>);

/// Loads a feature table from a CSV file. The header row is required; the
/// timestamp column holds integer indices or ISO-8601 dates, every other
/// column holds real values with the empty string marking a missing cell.
/// Rows are sorted ascending by timestamp and duplicate timestamps are
/// rejected.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<FeatureTable> {
    let malformed = |reason: String| Error::MalformedCsv {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| malformed(e.to_string()))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let ts_idx = headers
        .iter()
        .position(|h| *h == spec.timestamp_column)
        .ok_or_else(|| Error::UnknownColumn {
            name: spec.timestamp_column.clone(),
        })?;
    let value_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ts_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if !value_names.iter().any(|n| *n == spec.target_column) {
        return Err(Error::UnknownColumn {
            name: spec.target_column.clone(),
        });
    }

    let mut rows: Vec<Row> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(malformed(format!(
                "row {} has {} fields, header has {}",
                rows.len() + 2,
                record.len(),
                headers.len()
            )));
        }
        let ts = parse_timestamp(record[ts_idx].trim())
            .ok_or_else(|| malformed(format!("unparseable timestamp `{}`", &record[ts_idx])))?;
        let mut values = Vec::with_capacity(value_names.len());
        for (i, field) in record.iter().enumerate() {
            if i == ts_idx {
                continue;
            }
            let field = field.trim();
            if field.is_empty() {
                values.push(None);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| malformed(format!("unparseable value `{field}`")))?;
                if !v.is_finite() {
                    return Err(malformed(format!("non-finite value `{field}`")));
                }
                values.push(Some(v));
            }
        }
        rows.push((ts, values));
    }
    if rows.is_empty() {
        return Err(malformed("no data rows".into()));
    }
    let kinds_mixed = rows
        .iter()
        .any(|(t, _)| matches!(t, Timestamp::Index(_)) != matches!(rows[0].0, Timestamp::Index(_)));
    if kinds_mixed {
        return Err(malformed("mixed integer and date timestamps".into()));
    }

    table_from_rows(rows, &value_names, &spec.target_column).map_err(|e| match e {
        Error::DuplicateTimestamp { timestamp, .. } => Error::DuplicateTimestamp {
            path: path.to_path_buf(),
            timestamp,
        },
        other => other,
    })
}

/// Orders parsed rows by timestamp, rejects duplicates, and assembles the
/// table. The relation suite also feeds permuted rows through this entry
/// point, so ordering lives here and nowhere else.
pub fn table_from_rows(mut rows: Vec<Row>, value_names: &[String], target: &str) -> Result<FeatureTable> {
    if !faults::on(FaultId::LoaderSkipsSort) {
        rows.sort_by_key(|(ts, _)| *ts);
    }
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::DuplicateTimestamp {
                path: Default::default(),
                timestamp: pair[0].0.to_string(),
            });
        }
    }
    let timestamps: Vec<Timestamp> = rows.iter().map(|(ts, _)| *ts).collect();
    let columns: Vec<Column> = value_names
        .iter()
        .enumerate()
        .map(|(c, name)| Column {
            name: name.clone(),
            values: rows.iter().map(|(_, vals)| vals[c]).collect(),
        })
        .collect();
    FeatureTable::new(timestamps, columns, target)
}

/// Decomposes a table back into loader rows, for permute-and-reload checks.
pub fn table_to_rows(table: &FeatureTable) -> (Vec<Row>, Vec<String>) {
    let names: Vec<String> = table.columns().iter().map(|c| c.name.clone()).collect();
    let rows = table
        .timestamps()
        .iter()
        .enumerate()
        .map(|(i, ts)| {
            let values = table.columns().iter().map(|c| c.values[i]).collect();
            (*ts, values)
        })
        .collect();
    (rows, names)
}

/// Writes a table as CSV with the timestamp in the first column and missing
/// cells as empty strings.
pub fn write_csv(table: &FeatureTable, timestamp_column: &str, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::MalformedCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut header = vec![timestamp_column.to_string()];
    header.extend(table.columns().iter().map(|c| c.name.clone()));
    writer.write_record(&header)?;
    for (i, ts) in table.timestamps().iter().enumerate() {
        let mut record = vec![ts.to_string()];
        for col in table.columns() {
            record.push(match col.values[i] {
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_timestamp(field: &str) -> Option<Timestamp> {
    if let Ok(i) = field.parse::<i64>() {
        return Some(Timestamp::Index(i));
    }
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .ok()
        .map(Timestamp::Date)
}
