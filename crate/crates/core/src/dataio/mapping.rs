use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::rating::{Rating, Sample};

/// Where the four ratings live in a foreign CSV file.
///
/// ```json
/// {"interest": "Int", "qos": "QoS", "qor": "QoR", "qoe": "QoE", "delimiter": ";"}
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub interest: String,
    pub qos: String,
    pub qor: String,
    pub qoe: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Added to every raw value, for files rating on a shifted scale.
    #[serde(default)]
    pub offset: i64,
}

fn default_delimiter() -> char {
    ','
}

impl ColumnMapping {
    /// Mapping for files that name the columns `int,qos,qor,qoe`.
    pub fn canonical() -> Self {
        Self {
            interest: "int".into(),
            qos: "qos".into(),
            qor: "qor".into(),
            qoe: "qoe".into(),
            delimiter: ',',
            offset: 0,
        }
    }
}

/// Reads rating samples from a headed CSV; lines starting with `#` are
/// skipped.
pub fn read_rating_samples<R: Read>(input: R, mapping: &ColumnMapping) -> Result<Vec<Sample>, DataError> {
    let delimiter = u8::try_from(mapping.delimiter)
        .map_err(|_| DataError::Mapping(format!("delimiter `{}` is not ASCII", mapping.delimiter)))?;
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::Mapping(format!("column `{name}` not found")))
    };
    let cols = [column(&mapping.interest)?, column(&mapping.qos)?, column(&mapping.qor)?, column(&mapping.qoe)?];
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = [Rating::saturating(1); 4];
        for (slot, (&c, name)) in vals.iter_mut().zip(cols.iter().zip(["interest", "qos", "qor", "qoe"])) {
            let raw = rec.get(c).unwrap_or("").trim();
            let v: i64 = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64 + mapping.offset)
                .ok_or_else(|| DataError::Row { line, message: format!("{name} `{raw}` is not an integer") })?;
            *slot = u8::try_from(v)
                .ok()
                .and_then(|v| Rating::new(v).ok())
                .ok_or_else(|| DataError::Row { line, message: format!("{name}={v} outside 1..=5") })?;
        }
        out.push(Sample { interest: vals[0], qos: vals[1], qor: vals[2], qoe: vals[3] });
    }
    Ok(out)
}

pub fn load_rating_samples(path: &Path, mapping: &ColumnMapping) -> Result<Vec<Sample>, DataError> {
    read_rating_samples(std::fs::File::open(path)?, mapping)
}
