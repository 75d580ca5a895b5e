//! Parametric zoned rockfill section with a central clay core.
//!
//! The dam axis sits at `x = 0`; `y` is elevation in m a.s.l. Downstream of
//! the core lie a filter band and a chimney drain; a layer of bottom waste
//! material sits under both shells; the stone foundation spans the full
//! model width below the bed.

use serde::{Deserialize, Serialize};

use super::boundary::{boundary_conditions_for, Levels};
use super::polygon::{Point, Polygon};
use super::section::{DamSection, Zone};
use super::GeometryError;
use crate::material::{names, MaterialProperties};

/// Lowest admissible bed elevation (reservoir minimum), m a.s.l.
pub const MIN_BED_ELEVATION: f64 = 1560.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SahandParams {
    pub bed_elevation: f64,
    /// Crest height above the bed, m.
    pub dam_height: f64,
    pub crest_width: f64,
    /// Horizontal run per unit rise.
    pub upstream_slope: f64,
    pub downstream_slope: f64,
    pub core_top_width: f64,
    /// Horizontal run per unit rise of each core face.
    pub core_side_slope: f64,
    pub filter_width: f64,
    pub drain_width: f64,
    /// Depth of the filter/drain top below the crest, m.
    pub filter_top_depth: f64,
    pub waste_thickness: f64,
    pub foundation_depth: f64,
    pub domain_width: f64,
    /// Distance from the upstream toe to the upstream model boundary, m.
    pub upstream_margin: f64,
    pub crest_length: f64,
    /// Reservoir level used for the section's own boundary conditions.
    pub reservoir_level: f64,
    pub tailwater_level: Option<f64>,
}

impl Default for SahandParams {
    fn default() -> Self {
        Self {
            bed_elevation: 1560.0,
            dam_height: 47.0,
            crest_width: 10.0,
            upstream_slope: 2.5,
            downstream_slope: 2.0,
            core_top_width: 6.0,
            core_side_slope: 0.25,
            filter_width: 2.0,
            drain_width: 2.0,
            filter_top_depth: 2.0,
            waste_thickness: 3.0,
            foundation_depth: 60.0,
            domain_width: 500.0,
            upstream_margin: 200.0,
            crest_length: 450.0,
            reservoir_level: 1600.3,
            tailwater_level: None,
        }
    }
}

impl SahandParams {
    pub fn bed(&self) -> f64 {
        self.bed_elevation
    }

    pub fn crest(&self) -> f64 {
        self.bed_elevation + self.dam_height
    }

    pub fn half_crest(&self) -> f64 {
        0.5 * self.crest_width
    }

    pub fn upstream_toe_x(&self) -> f64 {
        -self.half_crest() - self.upstream_slope * self.dam_height
    }

    pub fn downstream_toe_x(&self) -> f64 {
        self.half_crest() + self.downstream_slope * self.dam_height
    }

    pub fn x_left(&self) -> f64 {
        self.upstream_toe_x() - self.upstream_margin
    }

    pub fn x_right(&self) -> f64 {
        self.x_left() + self.domain_width
    }

    /// Half width of the core at elevation `y`.
    pub fn core_half_width(&self, y: f64) -> f64 {
        0.5 * self.core_top_width + self.core_side_slope * (self.crest() - y)
    }

    pub fn filter_top(&self) -> f64 {
        self.crest() - self.filter_top_depth
    }

    /// Downstream face of the chimney drain at elevation `y`.
    pub fn drain_outer_x(&self, y: f64) -> f64 {
        self.core_half_width(y) + self.filter_width + self.drain_width
    }

    /// Elevation of the upstream face above `x`.
    pub fn upstream_face_y(&self, x: f64) -> f64 {
        self.bed_elevation + (x - self.upstream_toe_x()) / self.upstream_slope
    }

    /// Horizontal position of the downstream face at elevation `y`.
    pub fn downstream_face_x(&self, y: f64) -> f64 {
        self.half_crest() + self.downstream_slope * (self.crest() - y)
    }

    pub fn section_width(&self) -> f64 {
        self.downstream_toe_x() - self.upstream_toe_x()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fail = |msg: String| Err(GeometryError::Invalid(msg));
        let positive = [
            ("dam_height", self.dam_height),
            ("crest_width", self.crest_width),
            ("upstream_slope", self.upstream_slope),
            ("downstream_slope", self.downstream_slope),
            ("core_top_width", self.core_top_width),
            ("filter_width", self.filter_width),
            ("drain_width", self.drain_width),
            ("filter_top_depth", self.filter_top_depth),
            ("waste_thickness", self.waste_thickness),
            ("foundation_depth", self.foundation_depth),
            ("domain_width", self.domain_width),
            ("crest_length", self.crest_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.core_side_slope >= 0.0) || !(self.upstream_margin >= 0.0) {
            return fail("core_side_slope and upstream_margin must be non-negative".into());
        }
        if !(self.bed_elevation >= MIN_BED_ELEVATION) {
            return fail(format!(
                "bed elevation {} below {MIN_BED_ELEVATION}",
                self.bed_elevation
            ));
        }
        if self.core_top_width > self.crest_width {
            return fail("core top wider than the crest".into());
        }
        if self.waste_thickness + 1e-9 >= self.filter_top() - self.bed_elevation {
            return fail("waste layer reaches the filter top".into());
        }
        let ft = self.filter_top();
        if self.drain_outer_x(ft) >= self.downstream_face_x(ft) {
            return fail("filter and drain do not fit under the downstream face".into());
        }
        let t = self.waste_thickness;
        if self.upstream_toe_x() + self.upstream_slope * t >= -self.core_half_width(self.bed() + t)
            || self.downstream_toe_x() - self.downstream_slope * t
                <= self.drain_outer_x(self.bed() + t)
        {
            return fail("waste layer does not fit under the shells".into());
        }
        if self.domain_width < self.section_width() {
            return fail(format!(
                "domain width {} narrower than the section ({})",
                self.domain_width,
                self.section_width()
            ));
        }
        if self.x_right() <= self.downstream_toe_x() {
            return fail("domain ends before the downstream toe".into());
        }
        if self.reservoir_level > self.crest() {
            return fail(format!(
                "reservoir level {} above crest {}",
                self.reservoir_level,
                self.crest()
            ));
        }
        Ok(())
    }
}

/// Builds the seven-zone section. `materials` must contain the seven
/// material names in [`names`]; extra entries are kept for interventions.
pub fn build_sahand_section(
    params: &SahandParams,
    materials: Vec<MaterialProperties>,
) -> Result<DamSection, GeometryError> {
    params.validate()?;
    let p = params;
    let bed = p.bed();
    let crest = p.crest();
    let t = p.waste_thickness;
    let yft = p.filter_top();
    let c = |y: f64| p.core_half_width(y);
    let fw = p.filter_width;
    let hc = p.half_crest();
    let ht = 0.5 * p.core_top_width;
    let us_toe = p.upstream_toe_x();
    let ds_toe = p.downstream_toe_x();
    let pt = Point::new;

    let core = Polygon::new(vec![
        pt(-c(bed), bed),
        pt(c(bed), bed),
        pt(ht, crest),
        pt(-ht, crest),
    ]);
    let filter = Polygon::new(vec![
        pt(c(bed), bed),
        pt(c(bed) + fw, bed),
        pt(c(yft) + fw, yft),
        pt(c(yft), yft),
    ]);
    let drain = Polygon::new(vec![
        pt(c(bed) + fw, bed),
        pt(p.drain_outer_x(bed), bed),
        pt(p.drain_outer_x(yft), yft),
        pt(c(yft) + fw, yft),
    ]);
    let waste_us = Polygon::new(vec![
        pt(us_toe, bed),
        pt(-c(bed), bed),
        pt(-c(bed + t), bed + t),
        pt(us_toe + p.upstream_slope * t, bed + t),
    ]);
    let waste_ds = Polygon::new(vec![
        pt(p.drain_outer_x(bed), bed),
        pt(ds_toe, bed),
        pt(ds_toe - p.downstream_slope * t, bed + t),
        pt(p.drain_outer_x(bed + t), bed + t),
    ]);
    let shell_us = Polygon::new(vec![
        pt(us_toe + p.upstream_slope * t, bed + t),
        pt(-c(bed + t), bed + t),
        pt(-ht, crest),
        pt(-hc, crest),
    ]);
    let shell_ds_low = Polygon::new(vec![
        pt(p.drain_outer_x(bed + t), bed + t),
        pt(ds_toe - p.downstream_slope * t, bed + t),
        pt(p.downstream_face_x(yft), yft),
        pt(p.drain_outer_x(yft), yft),
    ]);
    let shell_ds_high = Polygon::new(vec![
        pt(c(yft), yft),
        pt(p.downstream_face_x(yft), yft),
        pt(hc, crest),
        pt(ht, crest),
    ]);
    let foundation = Polygon::rect(p.x_left(), bed - p.foundation_depth, p.x_right(), bed);

    let zone = |name: &str, pieces: Vec<Polygon>| Zone::new(name, name, pieces);
    let zones = vec![
        zone(names::UPSTREAM_SHELL, vec![shell_us]),
        zone(names::DOWNSTREAM_SHELL, vec![shell_ds_low, shell_ds_high]),
        zone(names::CORE, vec![core]),
        zone(names::STONE_FOUNDATION, vec![foundation]),
        zone(names::FILTER, vec![filter]),
        zone(names::DRAIN, vec![drain]),
        zone(names::BOTTOM_WASTE, vec![waste_us, waste_ds]),
    ];
    for z in &zones {
        if !materials.iter().any(|m| m.name == z.material) {
            return Err(GeometryError::UnknownMaterial {
                zone: z.name.clone(),
                material: z.material.clone(),
            });
        }
    }

    let mut section = DamSection {
        materials,
        zones,
        boundaries: Vec::new(),
        crest_elevation: crest,
        bed_elevation: bed,
        foundation_depth: p.foundation_depth,
        crest_length: p.crest_length,
        domain_width: p.domain_width,
        params: Some(p.clone()),
    };
    section.boundaries = boundary_conditions_for(
        &section,
        Levels {
            reservoir: p.reservoir_level,
            tailwater: p.tailwater_level,
        },
    )?;
    section.validate()?;
    Ok(section)
}
