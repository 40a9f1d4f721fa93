//! Daily reliability records (interruption counts plus weather).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::series::fahrenheit_to_celsius;
use super::IngestError;

/// One day of interruption counts and weather observations.
///
/// Weather fields are `None` when the source row left them blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRecord {
    pub date: NaiveDate,
    pub n_sustained: u32,
    pub n_momentary: u32,
    /// Average temperature, °C.
    pub temperature: Option<f64>,
    /// Sustained wind speed, m/s.
    pub wind: Option<f64>,
    /// Daily precipitation, mm.
    pub precipitation: Option<f64>,
    /// Average air pressure, hPa.
    pub pressure: Option<f64>,
    /// Daily lightning strike count.
    pub lightning: Option<f64>,
}

impl ReliabilityRecord {
    /// Weather in feature order `(T, W, P, A, L)` when every field is present.
    pub fn weather(&self) -> Option<[f64; 5]> {
        Some([
            self.temperature?,
            self.wind?,
            self.precipitation?,
            self.pressure?,
            self.lightning?,
        ])
    }
}

const HEADER: [&str; 8] = [
    "date",
    "n_sustained",
    "n_momentary",
    "temperature_c",
    "wind_ms",
    "precipitation_mm",
    "pressure_hpa",
    "lightning",
];

pub fn parse_records(path: impl AsRef<Path>) -> Result<Vec<ReliabilityRecord>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_records(file)
}

/// Reads records sorted by date. A `temperature_f` column is accepted in
/// place of `temperature_c` and converted.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<ReliabilityRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(IngestError::from_csv)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()));
    let (temp_col, temp_f) = match (find("temperature_c"), find("temperature_f")) {
        (Some(c), _) => (c, false),
        (None, Some(c)) => (c, true),
        (None, None) => return Err(IngestError::MissingColumn("temperature_c".into())),
    };
    let cols = [
        col("date")?,
        col("n_sustained")?,
        col("n_momentary")?,
        temp_col,
        col("wind_ms")?,
        col("precipitation_mm")?,
        col("pressure_hpa")?,
        col("lightning")?,
    ];

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(IngestError::from_csv)?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| record.get(cols[i]).unwrap_or("");
        let date = NaiveDate::parse_from_str(cell(0), "%Y-%m-%d").map_err(|_| IngestError::Timestamp {
            row,
            value: cell(0).to_string(),
        })?;
        let count = |i: usize| -> Result<u32, IngestError> {
            cell(i).parse::<u32>().map_err(|_| IngestError::Field {
                row,
                column: HEADER[i].to_string(),
                value: cell(i).to_string(),
            })
        };
        let weather = |i: usize| -> Result<Option<f64>, IngestError> {
            let raw = cell(i);
            if raw.is_empty() {
                return Ok(None);
            }
            match raw.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(IngestError::Field {
                    row,
                    column: HEADER[i].to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let lightning = weather(7)?;
        if matches!(lightning, Some(l) if l < 0.0) {
            return Err(IngestError::Field {
                row,
                column: "lightning".into(),
                value: cell(7).to_string(),
            });
        }
        out.push(ReliabilityRecord {
            date,
            n_sustained: count(1)?,
            n_momentary: count(2)?,
            temperature: weather(3)?.map(|t| if temp_f { fahrenheit_to_celsius(t) } else { t }),
            wind: weather(4)?,
            precipitation: weather(5)?,
            pressure: weather(6)?,
            lightning,
        });
    }
    out.sort_by_key(|r| r.date);
    if let Some(w) = out.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(IngestError::DuplicateDate(w[0].date));
    }
    Ok(out)
}

pub fn write_records<W: Write>(writer: W, records: &[ReliabilityRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER).map_err(IngestError::from_csv)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.n_sustained.to_string(),
            r.n_momentary.to_string(),
            opt(r.temperature),
            opt(r.wind),
            opt(r.precipitation),
            opt(r.pressure),
            opt(r.lightning),
        ])
        .map_err(IngestError::from_csv)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })
}
