//! Scenario transforms: insert intervention zones into a parametric section.

use super::boundary::boundary_conditions_for;
use super::polygon::{Point, Polygon, AREA_EPS};
use super::sahand::SahandParams;
use super::section::{DamSection, Intervention, Scenario, Zone};
use super::GeometryError;
use crate::material::names;

/// How an intervention claims area from the current zones.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    /// Takes area from base zones only; must gain some area.
    Fill,
    /// Takes area from base zones and non-wall interventions.
    Pierce,
    /// Sits outside the current union, on its boundary.
    Attach,
}

/// Returns a new section with the scenario's interventions inserted and
/// boundary conditions set for its reservoir and tailwater levels.
pub fn apply_scenario(section: &DamSection, scenario: &Scenario) -> Result<DamSection, GeometryError> {
    scenario.validate(section)?;
    let mut out = section.clone();
    if !scenario.interventions.is_empty() {
        let params = section.params.clone().ok_or_else(|| {
            GeometryError::Invalid("interventions need a parametric section".into())
        })?;
        let mut order: Vec<&Intervention> = scenario.interventions.iter().collect();
        order.sort_by_key(|i| i.rank());
        // per zone: Some(is_wall) for zones added here
        let mut origin: Vec<Option<bool>> = vec![None; out.zones.len()];
        for iv in order {
            apply_one(&mut out, &mut origin, &params, iv)?;
        }
        let keep: Vec<bool> = out.zones.iter().map(|z| !z.pieces.is_empty()).collect();
        let mut k = keep.iter();
        out.zones.retain(|_| *k.next().unwrap());
    }
    out.boundaries = boundary_conditions_for(&out, scenario)?;
    out.validate()?;
    Ok(out)
}

fn apply_one(
    s: &mut DamSection,
    origin: &mut Vec<Option<bool>>,
    p: &SahandParams,
    iv: &Intervention,
) -> Result<(), GeometryError> {
    let bed = p.bed();
    let bottom = bed - s.foundation_depth;
    let pt = Point::new;
    let need = |v: f64, what: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::Invalid(format!(
                "{}: {what} must be > 0, got {v}",
                iv.kind()
            )))
        }
    };
    let (name, shape, mode) = match iv {
        Intervention::FoundationDepthOverride { depth } => {
            need(*depth, "depth")?;
            return set_foundation_depth(s, p, *depth);
        }
        Intervention::CutoffUnderCore {
            depth, thickness, ..
        } => {
            need(*depth, "depth")?;
            need(*thickness, "thickness")?;
            if *thickness > 2.0 * p.core_half_width(bed) {
                return Err(GeometryError::OutsideDomain(
                    "cutoff wall wider than the core base".into(),
                ));
            }
            let h = 0.5 * thickness;
            (
                "Cutoff wall under core",
                Polygon::rect(-h, bed - depth, h, bed),
                Mode::Pierce,
            )
        }
        Intervention::CutoffUpstreamHeel {
            depth,
            thickness,
            shell_penetration,
            ..
        } => {
            need(*depth, "depth")?;
            need(*thickness, "thickness")?;
            need(*shell_penetration, "shell_penetration")?;
            let x0 = p.upstream_toe_x() + p.upstream_slope * shell_penetration;
            let x1 = x0 + thickness;
            (
                "Cutoff wall at upstream heel",
                Polygon::new(vec![
                    pt(x0, bed - depth),
                    pt(x1, bed - depth),
                    pt(x1, p.upstream_face_y(x1)),
                    pt(x0, p.upstream_face_y(x0)),
                ]),
                Mode::Pierce,
            )
        }
        Intervention::ConcreteCover { thickness, .. } => {
            need(*thickness, "thickness")?;
            let m = p.upstream_slope;
            let w = thickness * (1.0 + m * m).sqrt();
            let toe = p.upstream_toe_x();
            let hc = p.half_crest();
            (
                "Concrete cover",
                Polygon::new(vec![
                    pt(toe, bed),
                    pt(toe + w, bed),
                    pt(-hc + w, p.crest()),
                    pt(-hc, p.crest()),
                ]),
                Mode::Fill,
            )
        }
        Intervention::ClayBlanket {
            thickness, length, ..
        } => {
            need(*thickness, "thickness")?;
            need(*length, "length")?;
            let toe = p.upstream_toe_x();
            (
                "Clay blanket",
                Polygon::rect(toe - length, bed, toe, bed + thickness),
                Mode::Attach,
            )
        }
        Intervention::CoreExtension {
            length, thickness, ..
        } => {
            need(*thickness, "thickness")?;
            let toe = p.upstream_toe_x();
            let x_core = -p.core_half_width(bed);
            let reach = x_core - toe;
            let length = length.unwrap_or(reach);
            need(length, "length")?;
            if length > reach + 1e-9 {
                return Err(GeometryError::OutsideDomain(format!(
                    "core extension of {length} m runs past the upstream heel ({reach:.3} m)"
                )));
            }
            let x0 = (x_core - length).max(toe);
            let box_ = Polygon::new(vec![
                pt(x0, bed),
                pt(x_core, bed),
                pt(-p.core_half_width(bed + thickness), bed + thickness),
                pt(x0, bed + thickness),
            ]);
            // keep the part under the upstream face
            let face = box_.clip_left(pt(-p.half_crest(), p.crest()), pt(toe, bed));
            ("Core extension", face, Mode::Fill)
        }
        Intervention::BlanketDrain { depth, .. } => {
            need(*depth, "depth")?;
            let ds = p.downstream_toe_x();
            (
                "Blanket drain",
                Polygon::new(vec![
                    pt(p.drain_outer_x(bed), bed),
                    pt(ds, bed),
                    pt(ds - p.downstream_slope * depth, bed + depth),
                    pt(p.drain_outer_x(bed + depth), bed + depth),
                ]),
                Mode::Fill,
            )
        }
        Intervention::ClawDrain { depth, width, .. } => {
            need(*depth, "depth")?;
            need(*width, "width")?;
            let ds = p.downstream_toe_x();
            (
                "Claw drain",
                Polygon::rect(ds - 0.5 * width, bed - depth, ds + 0.5 * width, bed),
                Mode::Fill,
            )
        }
    };
    let material = iv.material().expect("zone-forming intervention has a material");
    if shape.is_empty() || !shape.is_convex() {
        return Err(GeometryError::Invalid(format!(
            "{}: degenerate intervention geometry",
            iv.kind()
        )));
    }
    let (lo, _) = shape.bbox();
    if lo.y < bottom - 1e-9 {
        return Err(GeometryError::OutsideDomain(format!(
            "{} reaches {:.3} m a.s.l., below the foundation base {bottom:.3}",
            iv.kind(),
            lo.y
        )));
    }

    let union_overlap: f64 = s
        .zones
        .iter()
        .flat_map(|z| z.pieces.iter())
        .map(|piece| piece.intersect_convex(&shape).area())
        .sum();
    let area = shape.area();
    match mode {
        Mode::Attach => {
            if union_overlap > AREA_EPS {
                return Err(GeometryError::Conflict(format!(
                    "{} overlaps existing zones",
                    iv.kind()
                )));
            }
            let (lo, hi) = shape.bbox();
            if lo.x < p.x_left() - 1e-9 || hi.x > p.x_right() + 1e-9 {
                return Err(GeometryError::OutsideDomain(format!(
                    "{} extends past the model boundary",
                    iv.kind()
                )));
            }
            s.zones.push(Zone::new(name, material, vec![shape]));
            origin.push(Some(false));
            return Ok(());
        }
        Mode::Fill | Mode::Pierce => {
            if union_overlap < area * (1.0 - 1e-9) - AREA_EPS {
                return Err(GeometryError::OutsideDomain(format!(
                    "{} extends outside the domain ({:.3} of {:.3} m² inside)",
                    iv.kind(),
                    union_overlap,
                    area
                )));
            }
        }
    }

    let is_wall = iv.is_wall();
    let mut claimed = Vec::new();
    for (zi, zone) in s.zones.iter_mut().enumerate() {
        let take = match (origin[zi], mode) {
            (None, _) => true,
            (Some(prev_wall), Mode::Pierce) => {
                let overlaps = zone
                    .pieces
                    .iter()
                    .any(|piece| piece.intersect_convex(&shape).area() > AREA_EPS);
                if prev_wall && overlaps {
                    return Err(GeometryError::Conflict(format!(
                        "{} overlaps zone '{}'",
                        iv.kind(),
                        zone.name
                    )));
                }
                true
            }
            (Some(_), _) => false,
        };
        if !take {
            continue;
        }
        let mut kept = Vec::with_capacity(zone.pieces.len());
        for piece in &zone.pieces {
            let inter = piece.intersect_convex(&shape);
            if inter.is_empty() {
                kept.push(piece.clone());
            } else {
                claimed.push(inter);
                kept.extend(piece.subtract_convex(&shape));
            }
        }
        zone.pieces = kept;
    }
    if claimed.is_empty() {
        return Err(GeometryError::Conflict(format!(
            "{} has no room left after earlier interventions",
            iv.kind()
        )));
    }
    s.zones.push(Zone::new(name, material, claimed));
    origin.push(Some(is_wall));
    Ok(())
}

fn set_foundation_depth(s: &mut DamSection, p: &SahandParams, depth: f64) -> Result<(), GeometryError> {
    let bed = p.bed();
    let current = s.foundation_depth;
    if depth > current {
        let fid = s
            .zones
            .iter()
            .position(|z| z.name == names::STONE_FOUNDATION)
            .ok_or_else(|| GeometryError::Invalid("no stone foundation zone to deepen".into()))?;
        s.zones[fid].pieces.push(Polygon::rect(
            p.x_left(),
            bed - depth,
            p.x_right(),
            bed - current,
        ));
    } else if depth < current {
        let y = bed - depth;
        for z in &mut s.zones {
            z.pieces = z
                .pieces
                .iter()
                .map(|piece| piece.clip_left(Point::new(0.0, y), Point::new(1.0, y)))
                .filter(|piece| !piece.is_empty())
                .collect();
        }
    }
    s.foundation_depth = depth;
    if let Some(params) = s.params.as_mut() {
        params.foundation_depth = depth;
    }
    Ok(())
}
