//! Config-driven study runs: sweeps, validation, calibration and screening.

pub mod config;
pub mod instruments;
pub mod sweep;
pub mod validate;

use std::collections::BTreeMap;

use crate::calibration::{screen_piezometers, CalibrationError, ScreenStatus, ScreenThresholds};

pub use config::{parse_config, RunConfig};
pub use instruments::{read_instrument_csv, Instruments, DISCHARGE, RESERVOIR};
pub use sweep::{run_sweep, solve_scenario, write_outputs, Manifest, ScenarioOutcome, SweepResult};
pub use validate::{run_calibration, validate_against_instruments, CalibrationReport, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("instrument file: {0}")]
    Instruments(String),
    #[error("scenario '{name}' failed: {reason}")]
    Scenario { name: String, reason: String },
    #[error("no healthy observations")]
    NoHealthyObservations,
    #[error("{0}")]
    MissingDate(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("i/o: {0}")]
    Io(String),
}

/// Screens every instrument except the reservoir and discharge records.
pub fn screen_all(instruments: &Instruments, thresholds: &ScreenThresholds) -> BTreeMap<String, ScreenStatus> {
    let reservoir = instruments.get(RESERVOIR).cloned().unwrap_or_default();
    let piezometers = instruments
        .iter()
        .filter(|(k, _)| k.as_str() != RESERVOIR && k.as_str() != DISCHARGE)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    screen_piezometers(&piezometers, &reservoir, thresholds)
}

#[cfg(test)]
mod tests;
