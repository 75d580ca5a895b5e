//! Permeability calibration against piezometer levels and piezometer screening.

pub mod screen;
pub mod simplex;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::fem::{solve_unconfined, SolverSettings};
use crate::geometry::{apply_scenario, DamSection, Scenario};
use crate::mesh::{triangulate, Mesh};
use crate::postproc::{probe_head, PiezometerRecord};

pub use screen::{screen_instrument, screen_piezometers, ScreenStatus, ScreenThresholds, Series};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};

/// Objective value returned when the inner solve fails, m.
pub const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("invalid calibration problem: {0}")]
    Invalid(String),
    #[error("parameter {name} = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("setup failed: {0}")]
    Setup(String),
}

/// A zone whose saturated permeability is fitted, searched in log10(m/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParameter {
    pub zone: String,
    pub lower: f64,
    pub upper: f64,
}

pub struct CalibrationProblem {
    pub section: DamSection,
    pub mesh: Arc<Mesh>,
    pub settings: SolverSettings,
    pub parameters: Vec<FreeParameter>,
    pub observations: Vec<PiezometerRecord>,
    pub fit_datum: bool,
    zone_k: Vec<f64>,
    zone_sets: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub rms: f64,
    /// Offset added to observed levels; the fitted one when the datum is free.
    pub datum_offset: f64,
    pub converged: bool,
    pub heads: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub zones: Vec<String>,
    pub log10_k: Vec<f64>,
    pub datum_offset: f64,
    pub rms_residual: f64,
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

impl CalibrationProblem {
    /// Applies the scenario, meshes once and indexes the free zones.
    pub fn new(
        base: &DamSection,
        scenario: &Scenario,
        mesh_size: f64,
        parameters: Vec<FreeParameter>,
        observations: Vec<PiezometerRecord>,
        fit_datum: bool,
        settings: SolverSettings,
    ) -> Result<Self, CalibrationError> {
        let section = apply_scenario(base, scenario).map_err(|e| CalibrationError::Setup(e.to_string()))?;
        let mesh = triangulate(&section, mesh_size, &[]).map_err(|e| CalibrationError::Setup(e.to_string()))?;
        Self::with_mesh(section, Arc::new(mesh), parameters, observations, fit_datum, settings)
    }

    pub fn with_mesh(
        section: DamSection,
        mesh: Arc<Mesh>,
        parameters: Vec<FreeParameter>,
        observations: Vec<PiezometerRecord>,
        fit_datum: bool,
        settings: SolverSettings,
    ) -> Result<Self, CalibrationError> {
        let zone_k = section
            .zone_conductivities()
            .map_err(|e| CalibrationError::Setup(e.to_string()))?;
        let mut zone_sets = Vec::new();
        for p in &parameters {
            let set: Vec<usize> = (0..section.zones.len())
                .filter(|&i| section.zones[i].name == p.zone)
                .collect();
            if set.is_empty() {
                return Err(CalibrationError::Invalid(format!("no zone named '{}'", p.zone)));
            }
            zone_sets.push(set);
        }
        settings
            .validate()
            .map_err(|e| CalibrationError::Invalid(e.to_string()))?;
        for o in &observations {
            o.validate().map_err(|e| CalibrationError::Invalid(e.to_string()))?;
        }
        Ok(Self {
            section,
            mesh,
            settings,
            parameters,
            observations,
            fit_datum,
            zone_k,
            zone_sets,
        })
    }

    /// Checks the invariants needed for a fit.
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.parameters.is_empty() {
            return Err(CalibrationError::Invalid("no free parameters".into()));
        }
        for p in &self.parameters {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(CalibrationError::Invalid(format!(
                    "bounds of '{}' must be finite with lower < upper",
                    p.zone
                )));
            }
        }
        let need = if self.fit_datum { 2 } else { 1 };
        if self.observations.len() < need {
            return Err(CalibrationError::Invalid(format!(
                "{} observation(s); at least {need} needed",
                self.observations.len()
            )));
        }
        Ok(())
    }

    fn check_bounds(&self, x: &[f64]) -> Result<(), CalibrationError> {
        if x.len() != self.parameters.len() {
            return Err(CalibrationError::Invalid(format!(
                "{} values for {} parameters",
                x.len(),
                self.parameters.len()
            )));
        }
        for (p, &v) in self.parameters.iter().zip(x) {
            if !(v >= p.lower && v <= p.upper) {
                return Err(CalibrationError::OutOfBounds {
                    name: p.zone.clone(),
                    value: v,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        Ok(())
    }

    /// Zone permeabilities with the free zones set to `10^x`.
    pub fn zone_conductivities(&self, x: &[f64]) -> Vec<f64> {
        let mut k = self.zone_k.clone();
        for (set, &v) in self.zone_sets.iter().zip(x) {
            for &z in set {
                k[z] = 10f64.powf(v);
            }
        }
        k
    }

    /// Runs a solve at `x` and scores the observations.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, CalibrationError> {
        self.check_bounds(x)?;
        if self.fit_datum && self.observations.len() < 2 {
            log::warn!(
                "datum offset fitted from {} observation(s): the misfit is under-determined",
                self.observations.len()
            );
        }
        let k = self.zone_conductivities(x);
        let penalty = |why: String| {
            log::warn!("calibration solve at {x:?} failed ({why}); penalty applied");
            Evaluation {
                rms: PENALTY,
                datum_offset: 0.0,
                converged: false,
                heads: Vec::new(),
            }
        };
        let sol = match solve_unconfined(&self.mesh, &k, &self.section.boundaries, &self.settings) {
            Ok(s) if s.converged => s,
            Ok(s) => return Ok(penalty(s.diagnostic.unwrap_or_default())),
            Err(e) => return Ok(penalty(e.to_string())),
        };
        let mut heads = Vec::with_capacity(self.observations.len());
        for o in &self.observations {
            match probe_head(&sol, o.location) {
                Ok(h) => heads.push(h),
                Err(e) => return Err(CalibrationError::Invalid(format!("{}: {e}", o.name))),
            }
        }
        Ok(score(&heads, &self.observations, self.fit_datum))
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64, CalibrationError> {
        self.evaluate(x).map(|e| e.rms)
    }
}

/// RMS of `head - (observed + offset)`; with a free datum the offset is the
/// mean of `head - observed`.
pub fn score(heads: &[f64], obs: &[PiezometerRecord], fit_datum: bool) -> Evaluation {
    let n = obs.len();
    let raw: Vec<f64> = heads.iter().zip(obs).map(|(h, o)| h - o.observed_level).collect();
    let datum_offset = if fit_datum {
        if n == 0 {
            0.0
        } else {
            raw.iter().sum::<f64>() / n as f64
        }
    } else {
        0.0
    };
    let sq: f64 = raw
        .iter()
        .zip(obs)
        .map(|(r, o)| {
            let off = if fit_datum { datum_offset } else { o.datum_offset };
            (r - off).powi(2)
        })
        .sum();
    Evaluation {
        rms: if n == 0 { 0.0 } else { (sq / n as f64).sqrt() },
        datum_offset,
        converged: true,
        heads: heads.to_vec(),
    }
}

/// Fits the free parameters from `start` (log10 m/s) with at most `budget`
/// objective evaluations.
pub fn calibrate(
    problem: &CalibrationProblem,
    start: &[f64],
    budget: usize,
) -> Result<CalibrationResult, CalibrationError> {
    problem.validate()?;
    let n = problem.parameters.len();
    if budget < 10 * n {
        return Err(CalibrationError::Invalid(format!(
            "budget {budget} below 10 x {n} parameters"
        )));
    }
    if start.len() != n {
        return Err(CalibrationError::Invalid(format!("{} start values for {n} parameters", start.len())));
    }
    let lower: Vec<f64> = problem.parameters.iter().map(|p| p.lower).collect();
    let upper: Vec<f64> = problem.parameters.iter().map(|p| p.upper).collect();
    let seen: Mutex<BTreeMap<Vec<u64>, Evaluation>> = Mutex::default();
    let key = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let f = |x: &[f64]| match problem.evaluate(x) {
        Ok(e) => {
            let rms = e.rms;
            seen.lock().unwrap().insert(key(x), e);
            rms
        }
        Err(_) => PENALTY,
    };
    let opts = SimplexOptions {
        budget,
        x_tol: 1e-3,
        f_tol: 0.1 * problem.settings.tol_head,
        step: 0.5,
    };
    let r = nelder_mead(&f, start, &lower, &upper, &opts);
    let best = match seen.lock().unwrap().remove(&key(&r.x)) {
        Some(e) => e,
        None => return Err(CalibrationError::Invalid("no successful evaluation".into())),
    };
    if !r.converged {
        log::warn!("calibration budget of {budget} evaluations exhausted");
    }
    Ok(CalibrationResult {
        zones: problem.parameters.iter().map(|p| p.zone.clone()).collect(),
        log10_k: r.x,
        datum_offset: best.datum_offset,
        rms_residual: best.rms,
        history: r.history,
        evaluations: r.evaluations,
        converged: r.converged,
    })
}
