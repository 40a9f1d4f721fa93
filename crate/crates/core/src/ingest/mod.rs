//! Time-series ingestion, alignment and correlation statistics.

mod records;
mod series;
mod stats;
mod table;

use chrono::{DateTime, NaiveDate, Utc};
use thiserror::Error;

pub use records::{parse_records, read_records, write_records, ReliabilityRecord};
pub use series::{fahrenheit_to_celsius, AlignedSeries, TimeWindow, Unit};
pub use stats::{
    align, bivariate_report, histogram_density, linear_fit, pearson, pearson_values, CorrelationReport, Density,
    LinearFit, PairFit,
};
pub use table::{
    parse_series, parse_table, read_table, write_series, write_table, ColumnSpec, ParsedSeries, ParsedTable,
    RejectedCell, SeriesSchema, TableSchema,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: malformed timestamp `{value}`")]
    Timestamp { row: u64, value: String },
    #[error("row {row}: invalid value `{value}` in column `{column}`")]
    Field { row: u64, column: String, value: String },
    #[error("duplicate timestamp {timestamp}")]
    DuplicateTimestamp { timestamp: DateTime<Utc> },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("window start {start} is not before end {end}")]
    InvalidWindow { start: DateTime<Utc>, end: DateTime<Utc> },
    #[error("series do not overlap")]
    EmptyOverlap,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("correlation undefined: zero variance in {0}")]
    ZeroVariance(String),
    #[error("need at least {needed} paired samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("need at least {needed} channels, found {found}")]
    TooFewChannels { needed: usize, found: usize },
}

impl IngestError {
    fn from_csv(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}
