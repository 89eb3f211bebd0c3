//! File formats and report tables.
//!
//! Session logs use a versioned CSV schema (see [`SESSION_SCHEMA`]); catalogs
//! are written as a video table, an edge list and a cache id list. Every
//! emitted file starts with `#` comment lines naming the schema or table and
//! the configuration and seed that produced it.

mod catalog_io;
mod mapping;
mod reports;
mod sessions;

use std::fmt::Write as _;

use thiserror::Error;

pub use catalog_io::{read_catalog, write_catalog, CACHE_FILE, EDGES_FILE, VIDEOS_FILE};
pub use mapping::{load_rating_samples, read_rating_samples, ColumnMapping};
pub use reports::{
    emit_abandonment_table, emit_distribution_table, emit_heatmap, emit_hr_rr, emit_ratings_table, AbandonmentRow,
    AbandonmentTable, DistributionRow, DistributionTable, Heatmap, HrRrRow, HrRrTable, MeanCi, RatingsRow,
    RatingsTable, ReportBundle,
};
pub use sessions::{load_sessions, read_sessions, save_sessions, session_samples, write_sessions, SESSION_SCHEMA};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("session {session}: {message}")]
    Chain { session: String, message: String },
    #[error("column mapping: {0}")]
    Mapping(String),
    #[error("catalog: {0}")]
    Catalog(#[from] crate::catalog::CatalogError),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// Key/value pairs written as `# key=value` header lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance(Vec<(String, String)>);

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_owned(), value.to_string().replace('\n', " ")));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }

    /// Header block; each line starts with `# `.
    pub fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            writeln!(out, "# {k}={v}").unwrap();
        }
        out
    }
}

/// Fixed-precision float for tables.
pub(crate) fn fx(v: f64) -> String {
    format!("{v:.4}")
}
