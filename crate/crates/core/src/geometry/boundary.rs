//! Hydraulic boundary assignment for parametric sections.

use super::graph::SNAP_TOL;
use super::polygon::Point;
use super::section::{BoundaryCondition, BoundarySegment, DamSection, Scenario};
use super::GeometryError;

/// Reservoir and tailwater levels, m a.s.l.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Levels {
    pub reservoir: f64,
    /// Defaults to the bed elevation.
    pub tailwater: Option<f64>,
}

impl From<&Scenario> for Levels {
    fn from(s: &Scenario) -> Self {
        Self {
            reservoir: s.reservoir_level,
            tailwater: s.tailwater_level,
        }
    }
}

const EPS: f64 = 1e-7;

/// Assigns conditions to the exterior of the zone union.
///
/// Lateral truncation and base are impermeable, as is the crest. Surface
/// edges upstream of the axis are fixed at the reservoir level where
/// submerged and impermeable above it; downstream surface edges are fixed at
/// the tailwater level where submerged and candidate seepage faces above.
pub fn boundary_conditions_for(
    section: &DamSection,
    levels: impl Into<Levels>,
) -> Result<Vec<BoundarySegment>, GeometryError> {
    let levels = levels.into();
    let bed = section.bed_elevation;
    let tailwater = levels.tailwater.unwrap_or(bed);
    let reservoir = levels.reservoir;
    let (lo, hi) = section.bbox();
    if reservoir < lo.y {
        return Err(GeometryError::Invalid(format!(
            "reservoir level {reservoir} below the domain bottom {}",
            lo.y
        )));
    }
    if reservoir > section.crest_elevation {
        return Err(GeometryError::Invalid(format!(
            "reservoir level {reservoir} above crest {}",
            section.crest_elevation
        )));
    }
    if tailwater < lo.y || tailwater > reservoir {
        return Err(GeometryError::Invalid(format!(
            "tailwater {tailwater} outside [{}, {reservoir}]",
            lo.y
        )));
    }

    let graph = section.graph();
    let loops = graph.boundary_loops();
    let crest = section.crest_elevation;
    let axis = axis_x(section, &graph.vertices, &loops);

    let mut segments = Vec::new();
    for ring in loops {
        let pts: Vec<Point> = ring.iter().map(|&i| graph.vertices[i]).collect();
        let n = pts.len();
        let mut pieces: Vec<(Point, Point, BoundaryCondition)> = Vec::new();
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let horizontal = (a.y - b.y).abs() <= EPS;
            let vertical = (a.x - b.x).abs() <= EPS;
            let on_base = horizontal && (a.y - lo.y).abs() <= EPS;
            let lateral = vertical
                && ((a.x - lo.x).abs() <= EPS || (a.x - hi.x).abs() <= EPS)
                && a.y.max(b.y) <= bed + EPS;
            let on_crest = horizontal && (a.y - crest).abs() <= EPS;
            if on_base || lateral || on_crest {
                pieces.push((a, b, BoundaryCondition::Impermeable));
                continue;
            }
            let mid_x = 0.5 * (a.x + b.x);
            let (level, below, above) = if mid_x < axis {
                (
                    reservoir,
                    BoundaryCondition::FixedHead { head: reservoir },
                    BoundaryCondition::Impermeable,
                )
            } else {
                (
                    tailwater,
                    BoundaryCondition::FixedHead { head: tailwater },
                    BoundaryCondition::SeepageFace,
                )
            };
            for (p, q) in split_at_level(a, b, level) {
                let mid_y = 0.5 * (p.y + q.y);
                let cond = if mid_y <= level + EPS { below } else { above };
                pieces.push((p, q, cond));
            }
        }
        segments.extend(merge_runs(pieces));
    }
    Ok(segments)
}

/// Splits `a b` where it crosses the horizontal line `y = level`.
fn split_at_level(a: Point, b: Point, level: f64) -> Vec<(Point, Point)> {
    let da = a.y - level;
    let db = b.y - level;
    if (da > SNAP_TOL && db < -SNAP_TOL) || (da < -SNAP_TOL && db > SNAP_TOL) {
        let t = da / (da - db);
        let m = Point::new(a.x + t * (b.x - a.x), level);
        vec![(a, m), (m, b)]
    } else {
        vec![(a, b)]
    }
}

/// Joins consecutive pieces with equal conditions into polylines,
/// wrapping around the closed ring.
fn merge_runs(pieces: Vec<(Point, Point, BoundaryCondition)>) -> Vec<BoundarySegment> {
    if pieces.is_empty() {
        return Vec::new();
    }
    // rotate so the ring starts at a condition change
    let n = pieces.len();
    let start = (0..n)
        .find(|&i| pieces[i].2 != pieces[(i + n - 1) % n].2)
        .unwrap_or(0);
    let mut out: Vec<BoundarySegment> = Vec::new();
    for k in 0..n {
        let (a, b, cond) = pieces[(start + k) % n];
        match out.last_mut() {
            Some(seg) if seg.condition == cond => seg.polyline.push(b),
            _ => out.push(BoundarySegment::new(vec![a, b], cond)),
        }
    }
    out
}

/// Dam axis: the parametric axis when known, else the middle of the crest.
fn axis_x(section: &DamSection, vertices: &[Point], loops: &[Vec<usize>]) -> f64 {
    if section.params.is_some() {
        return 0.0;
    }
    let crest: Vec<f64> = loops
        .iter()
        .flatten()
        .map(|&i| vertices[i])
        .filter(|p| (p.y - section.crest_elevation).abs() <= EPS)
        .map(|p| p.x)
        .collect();
    if crest.is_empty() {
        let (lo, hi) = section.bbox();
        return 0.5 * (lo.x + hi.x);
    }
    let lo = crest.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = crest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    0.5 * (lo + hi)
}
