//! Homogeneous rectangular dam used by the analytic benchmarks.

use super::boundary::{boundary_conditions_for, Levels};
use super::polygon::Polygon;
use super::section::{DamSection, Zone};
use super::GeometryError;
use crate::material::MaterialProperties;

pub const FILL: &str = "Homogeneous fill";

/// Rectangle `[0, length] x [0, height]` on an impermeable base with
/// reservoir level `h1` on the left face and tailwater `h2` on the right.
pub fn rectangular_dam(
    length: f64,
    height: f64,
    k_m_per_s: f64,
    h1: f64,
    h2: f64,
) -> Result<DamSection, GeometryError> {
    if !(length > 0.0 && height > 0.0) {
        return Err(GeometryError::Invalid(format!(
            "rectangle needs positive size, got {length} x {height}"
        )));
    }
    let material = MaterialProperties::hydraulic(FILL, k_m_per_s)
        .map_err(|e| GeometryError::Invalid(e.to_string()))?;
    let mut s = DamSection {
        materials: vec![material],
        zones: vec![Zone::new(FILL, FILL, vec![Polygon::rect(0.0, 0.0, length, height)])],
        boundaries: Vec::new(),
        crest_elevation: height,
        bed_elevation: 0.0,
        foundation_depth: 0.0,
        crest_length: 1.0,
        domain_width: length,
        params: None,
    };
    s.boundaries = boundary_conditions_for(
        &s,
        Levels {
            reservoir: h1,
            tailwater: Some(h2),
        },
    )?;
    s.validate()?;
    Ok(s)
}
