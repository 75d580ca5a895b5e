//! Instrument readings in `date,instrument,level_m` CSV form.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;

use super::StudyError;
use crate::calibration::Series;

/// Instrument name carrying the reservoir level, m a.s.l.
pub const RESERVOIR: &str = "RESERVOIR";
/// Instrument name carrying the measured total leakage; its `level_m`
/// column holds L/s.
pub const DISCHARGE: &str = "DISCHARGE";

const HEADER: [&str; 3] = ["date", "instrument", "level_m"];

pub type Instruments = BTreeMap<String, Series>;

pub fn read_instrument_csv<R: Read>(r: R) -> Result<Instruments, StudyError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = reader
        .headers()
        .map_err(|e| StudyError::Instruments(format!("header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != HEADER {
        return Err(StudyError::Instruments(format!(
            "header must be '{}', got '{}'",
            HEADER.join(","),
            names.join(",")
        )));
    }
    let mut out = Instruments::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| StudyError::Instruments(format!("line {line}: {e}")))?;
        let bad = |m: String| StudyError::Instruments(format!("line {line}: {m}"));
        if row.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", row.len())));
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| bad(format!("date '{}': {e}", &row[0])))?;
        let name = row[1].to_owned();
        if name.is_empty() {
            return Err(bad("empty instrument name".into()));
        }
        let level: f64 = row[2]
            .parse()
            .map_err(|_| bad(format!("level '{}' is not a number", &row[2])))?;
        if !level.is_finite() {
            return Err(bad(format!("level '{}' is not finite", &row[2])));
        }
        if out.entry(name.clone()).or_default().insert(date, level).is_some() {
            log::warn!("line {line}: duplicate reading of {name} on {date}; keeping the later row");
        }
    }
    Ok(out)
}
