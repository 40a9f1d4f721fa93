//! CSV ingestion onto uniform grids.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::series::{fahrenheit_to_celsius, AlignedSeries, Unit};
use super::IngestError;

const FALLBACK_FORMATS: [&str; 3] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"];

/// One value column to extract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Header name in the CSV file.
    pub column: String,
    /// Output series name, defaults to the column name.
    #[serde(default)]
    pub name: Option<String>,
    pub unit: Unit,
    /// Source values are °F and are converted to °C.
    #[serde(default)]
    pub fahrenheit: bool,
}

impl ColumnSpec {
    pub fn new(column: impl Into<String>, unit: Unit) -> Self {
        Self {
            column: column.into(),
            name: None,
            unit,
            fahrenheit: false,
        }
    }
}

/// Column map for a multi-channel CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    /// `chrono` format string for naive local timestamps. `None` accepts
    /// RFC 3339 or a few common ISO-like layouts.
    #[serde(default)]
    pub timestamp_format: Option<String>,
    /// Offset of the source clock from UTC, applied to naive timestamps.
    #[serde(default)]
    pub utc_offset_minutes: i32,
    pub resolution_s: u32,
    pub columns: Vec<ColumnSpec>,
}

fn default_timestamp_column() -> String {
    "timestamp".to_string()
}

impl TableSchema {
    pub fn new(resolution_s: u32, columns: Vec<ColumnSpec>) -> Self {
        Self {
            timestamp_column: default_timestamp_column(),
            timestamp_format: None,
            utc_offset_minutes: 0,
            resolution_s,
            columns,
        }
    }
}

/// Single-channel schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSchema {
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    #[serde(default)]
    pub timestamp_format: Option<String>,
    #[serde(default)]
    pub utc_offset_minutes: i32,
    pub resolution_s: u32,
    pub value: ColumnSpec,
}

impl From<&SeriesSchema> for TableSchema {
    fn from(s: &SeriesSchema) -> Self {
        TableSchema {
            timestamp_column: s.timestamp_column.clone(),
            timestamp_format: s.timestamp_format.clone(),
            utc_offset_minutes: s.utc_offset_minutes,
            resolution_s: s.resolution_s,
            columns: vec![s.value.clone()],
        }
    }
}

/// A cell that could not be parsed; the sample is kept as missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedCell {
    pub row: u64,
    pub column: String,
    pub raw: String,
}

#[derive(Debug, Clone)]
pub struct ParsedTable {
    pub series: Vec<AlignedSeries>,
    pub rejected: Vec<RejectedCell>,
}

impl ParsedTable {
    pub fn take(&mut self, name: &str) -> Option<AlignedSeries> {
        let i = self.series.iter().position(|s| s.name() == name)?;
        Some(self.series.remove(i))
    }
}

#[derive(Debug, Clone)]
pub struct ParsedSeries {
    pub series: AlignedSeries,
    pub rejected: Vec<RejectedCell>,
}

pub fn parse_series(path: impl AsRef<Path>, schema: &SeriesSchema) -> Result<ParsedSeries, IngestError> {
    let mut table = parse_table(path, &TableSchema::from(schema))?;
    Ok(ParsedSeries {
        series: table.series.remove(0),
        rejected: table.rejected,
    })
}

pub fn parse_table(path: impl AsRef<Path>, schema: &TableSchema) -> Result<ParsedTable, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_table(file, schema)
}

pub(crate) fn parse_timestamp(raw: &str, format: Option<&str>, utc_offset_minutes: i32) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    let offset = Duration::minutes(utc_offset_minutes as i64);
    if let Some(fmt) = format {
        return NaiveDateTime::parse_from_str(raw, fmt)
            .ok()
            .map(|n| n.and_utc() - offset);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    FALLBACK_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|n| n.and_utc() - offset)
}

/// Reads a CSV table, sorts rows by time and bins them onto a uniform grid
/// starting at the earliest timestamp. Several rows in one bin are averaged.
pub fn read_table<R: Read>(reader: R, schema: &TableSchema) -> Result<ParsedTable, IngestError> {
    if schema.resolution_s == 0 {
        return Err(IngestError::InvalidSeries("resolution must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(IngestError::from_csv)?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let ts_col = *index
        .get(schema.timestamp_column.as_str())
        .ok_or_else(|| IngestError::MissingColumn(schema.timestamp_column.clone()))?;
    let value_cols = schema
        .columns
        .iter()
        .map(|c| {
            index
                .get(c.column.as_str())
                .copied()
                .ok_or_else(|| IngestError::MissingColumn(c.column.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows: Vec<(DateTime<Utc>, Vec<Option<f64>>)> = Vec::new();
    let mut rejected = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(IngestError::from_csv)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw_ts = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts, schema.timestamp_format.as_deref(), schema.utc_offset_minutes).ok_or_else(
            || IngestError::Timestamp {
                row: line,
                value: raw_ts.to_string(),
            },
        )?;
        let mut values = Vec::with_capacity(value_cols.len());
        for (spec, &col) in schema.columns.iter().zip(&value_cols) {
            let raw = record.get(col).unwrap_or("");
            let v = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
                None
            } else {
                match raw.parse::<f64>() {
                    Ok(x) if x.is_finite() => Some(if spec.fahrenheit { fahrenheit_to_celsius(x) } else { x }),
                    _ => {
                        rejected.push(RejectedCell {
                            row: line,
                            column: spec.column.clone(),
                            raw: raw.to_string(),
                        });
                        None
                    }
                }
            };
            values.push(v);
        }
        rows.push((ts, values));
    }
    if rows.is_empty() {
        return Err(IngestError::InvalidSeries("no data rows".into()));
    }
    rows.sort_by_key(|(t, _)| *t);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IngestError::DuplicateTimestamp { timestamp: w[0].0 });
    }

    let start = rows[0].0;
    let res = schema.resolution_s as i64;
    let bin = |t: DateTime<Utc>| ((t - start).num_milliseconds() / (res * 1000)) as usize;
    let n = bin(rows[rows.len() - 1].0) + 1;
    let mut series = Vec::with_capacity(schema.columns.len());
    for (c, spec) in schema.columns.iter().enumerate() {
        let mut acc = vec![(0.0f64, 0usize); n];
        for (t, values) in &rows {
            if let Some(x) = values[c] {
                let slot = &mut acc[bin(*t)];
                slot.0 += x;
                slot.1 += 1;
            }
        }
        let values = acc.into_iter().map(|(s, k)| (k > 0).then(|| s / k as f64)).collect();
        let name = spec.name.clone().unwrap_or_else(|| spec.column.clone());
        series.push(AlignedSeries::new(name, spec.unit, start, schema.resolution_s, values)?);
    }
    Ok(ParsedTable { series, rejected })
}

pub(crate) fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Writes series sharing one grid as `timestamp,<name>...` CSV.
///
/// Present values use the shortest round-trip decimal form so a re-parse
/// reproduces them bit for bit.
pub fn write_table<W: Write>(writer: W, series: &[&AlignedSeries]) -> Result<(), IngestError> {
    let Some(first) = series.first() else {
        return Err(IngestError::TooFewChannels { needed: 1, found: 0 });
    };
    if let Some(bad) = series.iter().find(|s| !s.same_grid(first)) {
        return Err(IngestError::GridMismatch(format!(
            "{} does not share the grid of {}",
            bad.name(),
            first.name()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.iter().map(|s| s.name().to_string()));
    w.write_record(&header).map_err(IngestError::from_csv)?;
    for i in 0..first.len() {
        let mut row = vec![format_timestamp(first.timestamp(i))];
        row.extend(
            series
                .iter()
                .map(|s| s.get(i).map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&row).map_err(IngestError::from_csv)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_series<W: Write>(writer: W, series: &AlignedSeries) -> Result<(), IngestError> {
    write_table(writer, &[series])
}
