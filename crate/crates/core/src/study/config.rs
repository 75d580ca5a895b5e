//! Run configuration: section, materials, scenarios and run options.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::calibration::{FreeParameter, ScreenThresholds};
use crate::fem::SolverSettings;
use crate::geometry::{apply_scenario, build_sahand_section, DamSection, SahandParams, Scenario};
use crate::material::MaterialProperties;
use crate::postproc::svg::SvgOptions;
use crate::postproc::PiezometerRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSettings {
    /// Target element size, m.
    pub target_size: f64,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self { target_size: 4.0 }
    }
}

/// Total-discharge bands for the report's traffic-light column, L/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DischargeThresholds {
    pub green_max_lps: f64,
    pub yellow_max_lps: f64,
}

impl Default for DischargeThresholds {
    fn default() -> Self {
        Self {
            green_max_lps: 5.0,
            yellow_max_lps: 10.0,
        }
    }
}

impl DischargeThresholds {
    pub fn classify(&self, q_lps: f64) -> &'static str {
        if q_lps <= self.green_max_lps {
            "green"
        } else if q_lps <= self.yellow_max_lps {
            "yellow"
        } else {
            "red"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSettings {
    pub vtk: bool,
    pub svg: bool,
    pub svg_options: SvgOptions,
}

impl Default for ExportSettings {
    fn default() -> Self {
        Self {
            vtk: true,
            svg: true,
            svg_options: SvgOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub free_parameters: Vec<FreeParameter>,
    pub fit_datum: bool,
    pub budget: usize,
    /// log10 m/s per free parameter; the current material values when absent.
    pub start: Option<Vec<f64>>,
    /// Coarser mesh used for the repeated solves, m; the run mesh when absent.
    pub target_size: Option<f64>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            free_parameters: Vec::new(),
            fit_datum: true,
            budget: 200,
            start: None,
            target_size: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    /// Scenario solved at the observed reservoir level; the baseline when absent.
    pub scenario: Option<String>,
    pub fit_datum: bool,
    /// Observed over model discharge above which leakage is flagged.
    pub anomaly_ratio: f64,
    pub screen: ScreenThresholds,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            scenario: None,
            fit_datum: true,
            anomaly_ratio: 2.0,
            screen: ScreenThresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub section: SahandParams,
    pub materials: Vec<MaterialProperties>,
    pub scenarios: Vec<Scenario>,
    /// Reference scenario for discharge ratios; the first scenario when absent.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub mesh: MeshSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub discharge_thresholds: DischargeThresholds,
    #[serde(default)]
    pub export: ExportSettings,
    #[serde(default)]
    pub piezometers: Vec<PiezometerRecord>,
    #[serde(default)]
    pub calibration: CalibrationSettings,
    #[serde(default)]
    pub validation: ValidationSettings,
}

fn default_output_dir() -> String {
    "out".into()
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, StudyError> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| StudyError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: String| Err(StudyError::Config(m));
        if self.scenarios.is_empty() {
            return bad("no scenarios".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            if s.name.trim().is_empty() {
                return bad("scenario with an empty name".into());
            }
            if !names.insert(s.name.as_str()) {
                return bad(format!("duplicate scenario name '{}'", s.name));
            }
        }
        let mut materials = BTreeSet::new();
        for m in &self.materials {
            m.validate().map_err(|e| StudyError::Config(e.to_string()))?;
            if !materials.insert(m.name.as_str()) {
                return bad(format!("duplicate material '{}'", m.name));
            }
        }
        for s in &self.scenarios {
            for i in &s.interventions {
                if let Some(m) = i.material() {
                    if !materials.contains(m) {
                        return bad(format!(
                            "scenario '{}': {} references unknown material '{m}'",
                            s.name,
                            i.kind()
                        ));
                    }
                }
            }
        }
        if let Some(b) = &self.baseline {
            if !names.contains(b.as_str()) {
                return bad(format!("baseline '{b}' is not a scenario"));
            }
        }
        if let Some(v) = &self.validation.scenario {
            if !names.contains(v.as_str()) {
                return bad(format!("validation scenario '{v}' is not a scenario"));
            }
        }
        if !(self.mesh.target_size > 0.0 && self.mesh.target_size.is_finite()) {
            return bad(format!("mesh target_size must be positive, got {}", self.mesh.target_size));
        }
        if !(self.discharge_thresholds.green_max_lps <= self.discharge_thresholds.yellow_max_lps) {
            return bad("discharge thresholds need green_max_lps <= yellow_max_lps".into());
        }
        if !(self.validation.anomaly_ratio > 0.0) {
            return bad("validation anomaly_ratio must be positive".into());
        }
        let mut pz = BTreeSet::new();
        for p in &self.piezometers {
            p.validate().map_err(|e| StudyError::Config(e.to_string()))?;
            if !pz.insert(p.name.as_str()) {
                return bad(format!("duplicate piezometer '{}'", p.name));
            }
        }
        self.solver.validate().map_err(|e| StudyError::Config(e.to_string()))?;
        self.base_section()?;
        Ok(())
    }

    /// The parametric section with the configured materials.
    pub fn base_section(&self) -> Result<DamSection, StudyError> {
        build_sahand_section(&self.section, self.materials.clone()).map_err(|e| StudyError::Config(e.to_string()))
    }

    pub fn baseline_name(&self) -> &str {
        self.baseline.as_deref().unwrap_or(&self.scenarios[0].name)
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Section for one scenario, failing as a scenario error.
    pub fn scenario_section(&self, base: &DamSection, scenario: &Scenario) -> Result<DamSection, StudyError> {
        apply_scenario(base, scenario).map_err(|e| StudyError::Scenario {
            name: scenario.name.clone(),
            reason: e.to_string(),
        })
    }
}
