//! Material properties and permeability units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest accepted saturated permeability, m/s.
pub const MAX_K_SAT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("permeability '{0}' has no unit (expected 'cm/s' or 'm/s')")]
    MissingUnit(String),
    #[error("permeability '{0}' has unknown unit (expected 'cm/s' or 'm/s')")]
    UnknownUnit(String),
    #[error("permeability '{0}' is not a number")]
    BadValue(String),
    #[error("permeability {0} m/s outside (0, {MAX_K_SAT}] m/s")]
    OutOfRange(f64),
    #[error("material '{name}': {field} must be non-negative, got {value}")]
    Negative {
        name: String,
        field: &'static str,
        value: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PermeabilityUnit {
    #[serde(rename = "cm/s")]
    CentimetersPerSecond,
    #[serde(rename = "m/s")]
    MetersPerSecond,
}

impl PermeabilityUnit {
    fn as_str(self) -> &'static str {
        match self {
            Self::CentimetersPerSecond => "cm/s",
            Self::MetersPerSecond => "m/s",
        }
    }
}

/// A saturated hydraulic conductivity that remembers the unit it was entered in.
///
/// The value is kept in its input unit so re-serialization reproduces the
/// input text; [`Permeability::m_per_s`] gives the SI value used by the solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Permeability {
    value: f64,
    unit: PermeabilityUnit,
}

impl Permeability {
    pub fn new(value: f64, unit: PermeabilityUnit) -> Result<Self, MaterialError> {
        let k = Self { value, unit };
        let si = k.m_per_s();
        if !(si > 0.0 && si <= MAX_K_SAT) {
            return Err(MaterialError::OutOfRange(si));
        }
        Ok(k)
    }

    pub fn from_m_per_s(value: f64) -> Result<Self, MaterialError> {
        Self::new(value, PermeabilityUnit::MetersPerSecond)
    }

    pub fn from_cm_per_s(value: f64) -> Result<Self, MaterialError> {
        Self::new(value, PermeabilityUnit::CentimetersPerSecond)
    }

    pub fn m_per_s(&self) -> f64 {
        match self.unit {
            PermeabilityUnit::MetersPerSecond => self.value,
            PermeabilityUnit::CentimetersPerSecond => self.value / 100.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn unit(&self) -> PermeabilityUnit {
        self.unit
    }
}

impl fmt::Display for Permeability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} {}", self.value, self.unit.as_str())
    }
}

impl FromStr for Permeability {
    type Err = MaterialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (num, unit) = match t.split_once(char::is_whitespace) {
            Some((n, u)) => (n.trim(), u.trim()),
            None => {
                return Err(if t.parse::<f64>().is_ok() {
                    MaterialError::MissingUnit(s.to_string())
                } else {
                    MaterialError::BadValue(s.to_string())
                })
            }
        };
        let value: f64 = num
            .parse()
            .map_err(|_| MaterialError::BadValue(s.to_string()))?;
        let unit = match unit {
            "cm/s" => PermeabilityUnit::CentimetersPerSecond,
            "m/s" => PermeabilityUnit::MetersPerSecond,
            _ => return Err(MaterialError::UnknownUnit(s.to_string())),
        };
        Self::new(value, unit)
    }
}

impl Serialize for Permeability {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Permeability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(v) => Err(serde::de::Error::custom(MaterialError::MissingUnit(
                v.to_string(),
            ))),
        }
    }
}

/// One row of the material table. Unit weight, friction angle and cohesion
/// are carried for reporting only; no seepage computation reads them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialProperties {
    pub name: String,
    #[serde(rename = "k")]
    pub k_sat: Permeability,
    /// kN/m³
    #[serde(default)]
    pub gamma: f64,
    /// degrees
    #[serde(default)]
    pub phi: f64,
    /// kN/m²
    #[serde(default)]
    pub cohesion: f64,
}

impl MaterialProperties {
    pub fn new(
        name: impl Into<String>,
        k_sat: Permeability,
        gamma: f64,
        phi: f64,
        cohesion: f64,
    ) -> Result<Self, MaterialError> {
        let m = Self {
            name: name.into(),
            k_sat,
            gamma,
            phi,
            cohesion,
        };
        m.validate()?;
        Ok(m)
    }

    /// Seepage-only material with zeroed strength metadata.
    pub fn hydraulic(name: impl Into<String>, k_m_per_s: f64) -> Result<Self, MaterialError> {
        Self::new(name, Permeability::from_m_per_s(k_m_per_s)?, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        for (field, value) in [
            ("gamma", self.gamma),
            ("phi", self.phi),
            ("cohesion", self.cohesion),
        ] {
            if !(value >= 0.0) {
                return Err(MaterialError::Negative {
                    name: self.name.clone(),
                    field,
                    value,
                });
            }
        }
        Permeability::new(self.k_sat.value, self.k_sat.unit).map(|_| ())
    }

    pub fn k_m_per_s(&self) -> f64 {
        self.k_sat.m_per_s()
    }
}

pub mod names {
    pub const UPSTREAM_SHELL: &str = "Upstream shell";
    pub const DOWNSTREAM_SHELL: &str = "Downstream shell";
    pub const CORE: &str = "Core";
    pub const STONE_FOUNDATION: &str = "Stone foundation";
    pub const FILTER: &str = "Filter";
    pub const DRAIN: &str = "Drain adjacent to the filter";
    pub const BOTTOM_WASTE: &str = "Bottom waste material";
    pub const CONCRETE: &str = "Concrete cover";
}

/// The seven materials of the Sahand section plus the concrete used by the
/// cover intervention. Permeabilities in cm/s as tabulated.
pub fn sahand_materials() -> Vec<MaterialProperties> {
    let row = |name: &str, gamma: f64, phi: f64, c: f64, k_cm: f64| {
        MaterialProperties::new(
            name,
            Permeability::from_cm_per_s(k_cm).expect("tabulated permeability in range"),
            gamma,
            phi,
            c,
        )
        .expect("tabulated material is valid")
    };
    vec![
        row(names::UPSTREAM_SHELL, 20.0, 35.0, 30.0, 1e-1),
        row(names::DOWNSTREAM_SHELL, 20.0, 35.0, 30.0, 1e-1),
        row(names::CORE, 20.0, 30.0, 50.0, 1e-8),
        row(names::STONE_FOUNDATION, 21.0, 35.0, 0.0, 1e-4),
        row(names::FILTER, 18.0, 35.0, 0.0, 1e-2),
        row(names::DRAIN, 18.0, 35.0, 0.0, 1.0),
        row(names::BOTTOM_WASTE, 19.0, 30.0, 0.0, 1e-2),
        row(names::CONCRETE, 24.0, 0.0, 0.0, 1e-5),
    ]
}
