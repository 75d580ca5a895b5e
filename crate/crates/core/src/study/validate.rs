//! Model checks against instrument readings on one date.

use chrono::NaiveDate;
use serde::Serialize;

use super::config::RunConfig;
use super::instruments::{Instruments, DISCHARGE, RESERVOIR};
use super::sweep::solve_scenario;
use super::StudyError;
use crate::calibration::{calibrate, score, screen_instrument, CalibrationProblem, CalibrationResult, ScreenStatus};
use crate::geometry::Scenario;
use crate::postproc::{probe_head, PiezometerRecord};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiezometerResidual {
    pub name: String,
    pub screen: ScreenStatus,
    pub used: bool,
    pub observed_level: Option<f64>,
    /// m a.s.l.
    pub model_head: Option<f64>,
    /// Model minus datum-corrected observation, m.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub date: NaiveDate,
    pub scenario: String,
    pub reservoir_level: f64,
    pub piezometers: Vec<PiezometerResidual>,
    pub datum_offset: f64,
    pub rms_residual: f64,
    pub model_q_lps: f64,
    pub observed_q_lps: Option<f64>,
    pub leakage_anomaly: bool,
}

fn reservoir_on(instruments: &Instruments, date: NaiveDate) -> Result<f64, StudyError> {
    instruments
        .get(RESERVOIR)
        .and_then(|s| s.get(&date))
        .copied()
        .ok_or_else(|| StudyError::MissingDate(format!("no {RESERVOIR} reading on {date}")))
}

/// Screens the configured piezometers and returns the usable ones with their
/// reading on `date`. Records with too short a history are kept.
fn usable_observations(
    config: &RunConfig,
    instruments: &Instruments,
    date: NaiveDate,
) -> Result<(Vec<PiezometerRecord>, Vec<PiezometerResidual>), StudyError> {
    let empty = Default::default();
    let reservoir = instruments.get(RESERVOIR).unwrap_or(&empty);
    let mut used = Vec::new();
    let mut rows = Vec::new();
    for p in &config.piezometers {
        let series = instruments.get(&p.name).unwrap_or(&empty);
        let status = screen_instrument(series, reservoir, &config.validation.screen);
        let reading = series.get(&date).copied();
        let ok = !matches!(status, ScreenStatus::Defective { .. }) && reading.is_some();
        match (&status, reading) {
            (ScreenStatus::Defective { reason, .. }, _) => log::warn!("{} excluded: {reason}", p.name),
            (_, None) => log::warn!("{} has no reading on {date}", p.name),
            (ScreenStatus::Indeterminate { reason }, _) => log::warn!("{} not screened: {reason}", p.name),
            _ => {}
        }
        if let (true, Some(level)) = (ok, reading) {
            used.push(PiezometerRecord {
                observed_level: level,
                ..p.clone()
            });
        }
        rows.push(PiezometerResidual {
            name: p.name.clone(),
            screen: status,
            used: ok,
            observed_level: reading,
            model_head: None,
            residual: None,
        });
    }
    if used.is_empty() {
        return Err(StudyError::NoHealthyObservations);
    }
    Ok((used, rows))
}

fn scenario_at(config: &RunConfig, name: &str, level: f64) -> Result<Scenario, StudyError> {
    let mut s = config
        .scenario(name)
        .ok_or_else(|| StudyError::Config(format!("no scenario named '{name}'")))?
        .clone();
    s.reservoir_level = level;
    Ok(s)
}

/// Solves the validation scenario at the reservoir level of `date` and
/// compares heads and discharge with the readings.
pub fn validate_against_instruments(
    config: &RunConfig,
    instruments: &Instruments,
    date: NaiveDate,
) -> Result<ValidationReport, StudyError> {
    let level = reservoir_on(instruments, date)?;
    let (obs, mut rows) = usable_observations(config, instruments, date)?;
    let name = config
        .validation
        .scenario
        .clone()
        .unwrap_or_else(|| config.baseline_name().to_owned());
    let scenario = scenario_at(config, &name, level)?;
    let base = config.base_section()?;
    let run = solve_scenario(config, &base, &scenario).map_err(|reason| StudyError::Scenario {
        name: name.clone(),
        reason,
    })?;
    let mut heads = Vec::with_capacity(obs.len());
    for o in &obs {
        heads.push(probe_head(&run.solution, o.location).map_err(|e| StudyError::Config(format!("{}: {e}", o.name)))?);
    }
    let fit = config.validation.fit_datum;
    if fit && obs.len() < 2 {
        log::warn!("datum fitted from a single piezometer: its residual is zero by construction");
    }
    let eval = score(&heads, &obs, fit);
    for (o, h) in obs.iter().zip(&heads) {
        let offset = if fit { eval.datum_offset } else { o.datum_offset };
        let row = rows.iter_mut().find(|r| r.name == o.name).expect("row per piezometer");
        row.model_head = Some(*h);
        row.residual = Some(h - (o.observed_level + offset));
    }
    let model_q = run.summary.discharge.q_total_lps;
    let observed_q = instruments.get(DISCHARGE).and_then(|s| s.get(&date)).copied();
    let anomaly = observed_q.is_some_and(|q| q > config.validation.anomaly_ratio * model_q);
    if anomaly {
        log::warn!(
            "leakage anomaly: observed {:.2} L/s against model {model_q:.2} L/s",
            observed_q.unwrap_or_default()
        );
    }
    Ok(ValidationReport {
        date,
        scenario: name,
        reservoir_level: level,
        piezometers: rows,
        datum_offset: eval.datum_offset,
        rms_residual: eval.rms,
        model_q_lps: model_q,
        observed_q_lps: observed_q,
        leakage_anomaly: anomaly,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub date: NaiveDate,
    pub scenario: String,
    pub reservoir_level: f64,
    pub observations: Vec<String>,
    pub start: Vec<f64>,
    pub result: CalibrationResult,
}

/// Fits the configured free zones to the readings of `date`.
pub fn run_calibration(
    config: &RunConfig,
    instruments: &Instruments,
    date: NaiveDate,
) -> Result<CalibrationReport, StudyError> {
    let settings = &config.calibration;
    if settings.free_parameters.is_empty() {
        return Err(StudyError::Config("calibration.free_parameters is empty".into()));
    }
    let level = reservoir_on(instruments, date)?;
    let (obs, _) = usable_observations(config, instruments, date)?;
    let name = config
        .validation
        .scenario
        .clone()
        .unwrap_or_else(|| config.baseline_name().to_owned());
    let scenario = scenario_at(config, &name, level)?;
    let base = config.base_section()?;
    let size = settings.target_size.unwrap_or(config.mesh.target_size);
    let names: Vec<String> = obs.iter().map(|o| o.name.clone()).collect();
    let problem = CalibrationProblem::new(
        &base,
        &scenario,
        size,
        settings.free_parameters.clone(),
        obs,
        settings.fit_datum,
        config.solver.clone(),
    )?;
    let start = match &settings.start {
        Some(s) => s.clone(),
        None => settings
            .free_parameters
            .iter()
            .map(|p| {
                let z = problem.section.zone_index(&p.zone).expect("zone checked by the problem");
                let k = problem
                    .section
                    .material(&problem.section.zones[z].material)
                    .map(|m| m.k_m_per_s().log10())
                    .unwrap_or(0.5 * (p.lower + p.upper));
                k.clamp(p.lower, p.upper)
            })
            .collect(),
    };
    let result = calibrate(&problem, &start, settings.budget)?;
    Ok(CalibrationReport {
        date,
        scenario: name,
        reservoir_level: level,
        observations: names,
        start,
        result,
    })
}
