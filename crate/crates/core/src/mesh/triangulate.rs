//! Constrained Delaunay meshing of a section with Ruppert refinement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::{BoundaryEdge, Element, Mesh, MeshError};
use crate::geometry::graph::SectionGraph;
use crate::geometry::polygon::{orient, segment_distance};
use crate::geometry::{DamSection, Point, Polygon};

/// Convex area meshed at a finer size than the global target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementRegion {
    pub polygon: Polygon,
    /// m
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshOptions {
    /// Minimum interior angle, degrees; at least 15.
    pub min_angle: f64,
    pub max_rounds: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            min_angle: 20.0,
            max_rounds: 10,
        }
    }
}

/// Largest area for which a triangle with all angles above 20° keeps its
/// longest edge within twice the target size.
const AREA_FACTOR: f64 = 0.75 * 0.433_012_701_892_219_3;
const MAX_VERTICES: usize = 3_000_000;

pub fn triangulate(
    section: &DamSection,
    target_size: f64,
    refinement_regions: &[RefinementRegion],
) -> Result<Mesh, MeshError> {
    triangulate_with(section, target_size, refinement_regions, &MeshOptions::default())
}

pub fn triangulate_with(
    section: &DamSection,
    target_size: f64,
    refinement_regions: &[RefinementRegion],
    options: &MeshOptions,
) -> Result<Mesh, MeshError> {
    if !(target_size > 0.0 && target_size.is_finite()) {
        return Err(MeshError::BadSize(target_size));
    }
    for r in refinement_regions {
        if !(r.size > 0.0 && r.size.is_finite()) {
            return Err(MeshError::BadSize(r.size));
        }
    }
    let floor = 1e-3 * target_size;
    let base: Vec<f64> = section
        .zones
        .iter()
        .map(|z| {
            let t = z.thickness();
            if t < target_size {
                0.5 * t
            } else {
                target_size
            }
        })
        .collect();
    let mut factor = vec![1.0; section.zones.len()];
    let mut last = None;
    for _ in 0..options.max_rounds.max(1) {
        let sizes: Vec<f64> = base.iter().zip(&factor).map(|(b, f)| b * f).collect();
        if let Some(z) = sizes.iter().position(|&s| !(s >= floor)) {
            return Err(MeshError::ThinZone {
                zone: section.zones[z].name.clone(),
                reason: format!(
                    "local size {:.3e} m below the resolution limit {floor:.3e} m",
                    sizes[z]
                ),
            });
        }
        match attempt(section, target_size, &sizes, refinement_regions, options) {
            Ok(mesh) => return Ok(mesh),
            Err(Failure::Zone(z, reason)) => {
                factor[z] *= 0.5;
                last = Some((z, reason));
            }
            Err(Failure::Fatal(e)) => return Err(e),
        }
    }
    let (z, reason) = last.expect("at least one round ran");
    Err(MeshError::ThinZone {
        zone: section.zones[z].name.clone(),
        reason: format!("{reason} after {} refinement rounds", options.max_rounds),
    })
}

enum Failure {
    Zone(usize, String),
    Fatal(MeshError),
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        Failure::Fatal(e)
    }
}

fn attempt(
    section: &DamSection,
    target: f64,
    zone_size: &[f64],
    regions: &[RefinementRegion],
    options: &MeshOptions,
) -> Result<Mesh, Failure> {
    let extra: Vec<Point> = section
        .boundaries
        .iter()
        .flat_map(|b| b.polyline.iter().copied())
        .collect();
    let graph = SectionGraph::build_with_points(&section.zones, &extra);
    let kept: Vec<_> = graph
        .edges
        .iter()
        .filter(|e| e.left != e.right)
        .copied()
        .collect();

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point| {
        cdt.insert(Point2::new(p.x, p.y))
            .map_err(|e| MeshError::Triangulation(format!("{e:?} at ({}, {})", p.x, p.y)))
    };
    let mut handles = BTreeMap::new();
    for e in &kept {
        for v in [e.a, e.b] {
            if let std::collections::btree_map::Entry::Vacant(slot) = handles.entry(v) {
                slot.insert(insert(&mut cdt, graph.vertices[v])?);
            }
        }
    }
    for e in &kept {
        let (pa, pb) = (graph.vertices[e.a], graph.vertices[e.b]);
        let mut h = [e.left, e.right]
            .iter()
            .flatten()
            .map(|&z| zone_size[z])
            .fold(target, f64::min);
        let mid = pa.lerp(pb, 0.5);
        for r in regions {
            if r.polygon.contains(mid, 1e-9) || r.polygon.contains(pa, 1e-9) || r.polygon.contains(pb, 1e-9) {
                h = h.min(r.size);
            }
        }
        let n = (pa.dist(pb) / h).ceil().max(1.0) as usize;
        let mut prev = handles[&e.a];
        for i in 1..=n {
            let next = if i == n {
                handles[&e.b]
            } else {
                insert(&mut cdt, pa.lerp(pb, i as f64 / n as f64))?
            };
            if prev != next && cdt.try_add_constraint(prev, next).is_empty() {
                return Err(Failure::Fatal(MeshError::Triangulation(format!(
                    "constraint ({}, {}) - ({}, {}) crosses another",
                    pa.x, pa.y, pb.x, pb.y
                ))));
            }
            prev = next;
        }
    }
    for r in regions {
        for p in lattice(&r.polygon, r.size) {
            let inside = section.zones.iter().any(|z| z.contains(p, -0.25 * r.size));
            let clear = kept.iter().all(|e| {
                segment_distance(p, graph.vertices[e.a], graph.vertices[e.b]).0 >= 0.5 * r.size
            });
            if inside && clear {
                insert(&mut cdt, p)?;
            }
        }
    }

    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(options.min_angle.max(15.0)))
        .with_max_allowed_area(AREA_FACTOR * target * target)
        .with_max_additional_vertices(MAX_VERTICES);
    let result = cdt.refine(params);

    let bboxes: Vec<Vec<(Point, Point, &Polygon)>> = section
        .zones
        .iter()
        .map(|z| z.pieces.iter().map(|p| (p.bbox().0, p.bbox().1, p)).collect())
        .collect();
    let zone_of = |c: Point| {
        bboxes.iter().position(|pieces| {
            pieces.iter().any(|(lo, hi, poly)| {
                c.x >= lo.x - 1e-9
                    && c.x <= hi.x + 1e-9
                    && c.y >= lo.y - 1e-9
                    && c.y <= hi.y + 1e-9
                    && poly.contains(c, 1e-9)
            })
        })
    };

    let mut raw: Vec<([usize; 3], usize)> = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let pts = vs.map(|v| {
            let p = v.position();
            Point::new(p.x, p.y)
        });
        let c = Point::new(
            (pts[0].x + pts[1].x + pts[2].x) / 3.0,
            (pts[0].y + pts[1].y + pts[2].y) / 3.0,
        );
        if let Some(z) = zone_of(c) {
            let mut ids = vs.map(|v| v.fix().index());
            if orient(pts[0], pts[1], pts[2]) < 0.0 {
                ids.swap(1, 2);
            }
            raw.push((ids, z));
        }
    }
    // faces come out in handle order, which is insertion order
    let mut remap = vec![usize::MAX; cdt.num_vertices()];
    let mut used: Vec<bool> = vec![false; cdt.num_vertices()];
    for (ids, _) in &raw {
        for &i in ids {
            used[i] = true;
        }
    }
    let mut nodes = Vec::new();
    for (i, v) in cdt.vertices().enumerate() {
        if used[i] {
            remap[i] = nodes.len();
            let p = v.position();
            nodes.push(Point::new(p.x, p.y));
        }
    }
    let elements: Vec<Element> = raw
        .into_iter()
        .map(|(ids, zone)| Element {
            nodes: ids.map(|i| remap[i]),
            zone,
        })
        .collect();
    let mut mesh = Mesh {
        nodes,
        elements,
        boundary_edges: Vec::new(),
        target_size: target,
        zone_names: section.zones.iter().map(|z| z.name.clone()).collect(),
    };

    // per-zone checks
    let nz = section.zones.len();
    let mut zone_area = vec![0.0; nz];
    let mut zone_min_angle = vec![f64::INFINITY; nz];
    for e in 0..mesh.elements.len() {
        let z = mesh.elements[e].zone;
        zone_area[z] += mesh.element_area(e);
        for a in super::triangle_angles(mesh.element_points(e)) {
            zone_min_angle[z] = zone_min_angle[z].min(a);
        }
    }
    for z in 0..nz {
        let want = section.zones[z].area();
        if zone_area[z] <= 0.0 {
            return Err(Failure::Zone(z, "no elements".into()));
        }
        if (zone_area[z] - want).abs() > 1e-6 * want {
            return Err(Failure::Zone(
                z,
                format!("meshed area {} differs from zone area {want}", zone_area[z]),
            ));
        }
    }
    let worst = (0..nz)
        .min_by(|&a, &b| zone_min_angle[a].total_cmp(&zone_min_angle[b]))
        .expect("at least one zone");
    if !result.refinement_complete {
        return Err(Failure::Zone(worst, "refinement ran out of vertices".into()));
    }
    if zone_min_angle[worst] < options.min_angle.max(15.0) - 1e-6 {
        return Err(Failure::Zone(
            worst,
            format!("minimum angle {:.2}°", zone_min_angle[worst]),
        ));
    }

    mesh.boundary_edges = boundary_edges(&mesh, section)?;
    Ok(mesh)
}

/// Triangular lattice points with spacing `h` inside a convex polygon.
fn lattice(poly: &Polygon, h: f64) -> Vec<Point> {
    let (lo, hi) = poly.bbox();
    let dy = h * 3f64.sqrt() / 2.0;
    let mut out = Vec::new();
    let mut row = 0usize;
    let mut y = lo.y + 0.5 * dy;
    while y < hi.y {
        let shift = if row % 2 == 0 { 0.0 } else { 0.5 * h };
        let mut x = lo.x + 0.5 * h + shift;
        while x < hi.x {
            let p = Point::new(x, y);
            if poly.contains(p, -0.25 * h) {
                out.push(p);
            }
            x += h;
        }
        y += dy;
        row += 1;
    }
    out
}

/// Edges used by exactly one element, tagged with the boundary segment they
/// lie on.
fn boundary_edges(mesh: &Mesh, section: &DamSection) -> Result<Vec<BoundaryEdge>, MeshError> {
    let mut count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
    for el in &mesh.elements {
        for k in 0..3 {
            let (a, b) = (el.nodes[k], el.nodes[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            count.entry(key).or_insert((0, [a, b])).0 += 1;
        }
    }
    let seg_edges: Vec<(usize, Point, Point)> = section
        .boundaries
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.edges().map(move |(a, b)| (i, a, b)))
        .collect();
    let mut out = Vec::new();
    for (_, (n, nodes)) in count {
        if n != 1 {
            continue;
        }
        let (pa, pb) = (mesh.nodes[nodes[0]], mesh.nodes[nodes[1]]);
        let mid = pa.lerp(pb, 0.5);
        let tol = 1e-6 * (1.0 + pa.dist(pb));
        let seg = seg_edges
            .iter()
            .find(|(_, a, b)| {
                segment_distance(mid, *a, *b).0 <= tol
                    && segment_distance(pa, *a, *b).0 <= tol
                    && segment_distance(pb, *a, *b).0 <= tol
            })
            .map(|(i, _, _)| *i)
            .ok_or(MeshError::UncoveredBoundary(nodes))?;
        out.push(BoundaryEdge {
            nodes,
            segment: seg,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_sahand_section, BoundaryCondition, BoundarySegment, Intervention, SahandParams,
        Scenario, Zone,
    };
    use crate::geometry::apply_scenario;
    use crate::material::{names, sahand_materials, MaterialProperties};
    use crate::mesh::mesh_quality;

    fn boxed(zones: Vec<Zone>) -> DamSection {
        let mut s = DamSection {
            materials: vec![MaterialProperties::hydraulic("m", 1e-5).unwrap()],
            zones,
            boundaries: Vec::new(),
            crest_elevation: 2.0,
            bed_elevation: 0.0,
            foundation_depth: 1.0,
            crest_length: 1.0,
            domain_width: 1.0,
            params: None,
        };
        let hull = s.hull_polygon();
        let mut ring = hull.vertices.clone();
        ring.push(ring[0]);
        s.boundaries = vec![BoundarySegment::new(ring, BoundaryCondition::Impermeable)];
        s
    }

    fn unit_square() -> DamSection {
        boxed(vec![Zone::new("a", "m", vec![Polygon::rect(0.0, 0.0, 1.0, 1.0)])])
    }

    #[test]
    fn unit_square_area() {
        let m = triangulate(&unit_square(), 0.5, &[]).unwrap();
        let total: f64 = (0..m.elements.len()).map(|e| m.element_area(e)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.elements.iter().all(|_| true));
        for e in 0..m.elements.len() {
            assert!(m.element_area(e) > 0.0);
        }
    }

    #[test]
    fn stacked_squares_conform() {
        let s = boxed(vec![
            Zone::new("lower", "m", vec![Polygon::rect(0.0, 0.0, 1.0, 1.0)]),
            Zone::new("upper", "m", vec![Polygon::rect(0.0, 1.0, 1.0, 2.0)]),
        ]);
        let m = triangulate(&s, 0.5, &[]).unwrap();
        for e in 0..m.elements.len() {
            let pts = m.element_points(e);
            let below = pts.iter().all(|p| p.y <= 1.0 + 1e-12);
            let above = pts.iter().all(|p| p.y >= 1.0 - 1e-12);
            assert!(below || above, "element {e} crosses the interface");
            assert_eq!(m.elements[e].zone, if below { 0 } else { 1 });
        }
        assert!((m.zone_area(0) - 1.0).abs() < 1e-9);
        assert!((m.zone_area(1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn edges_bounded_by_twice_target() {
        let m = triangulate(&unit_square(), 0.2, &[]).unwrap();
        for e in 0..m.elements.len() {
            let p = m.element_points(e);
            for k in 0..3 {
                assert!(p[k].dist(p[(k + 1) % 3]) <= 0.4 + 1e-12);
            }
        }
        assert!(mesh_quality(&m).min_angle >= 20.0);
    }

    #[test]
    fn refinement_region_adds_elements() {
        let coarse = triangulate(&unit_square(), 0.5, &[]).unwrap();
        let region = RefinementRegion {
            polygon: Polygon::rect(0.0, 0.0, 0.5, 0.5),
            size: 0.05,
        };
        let fine = triangulate(&unit_square(), 0.5, &[region]).unwrap();
        assert!(fine.elements.len() > 4 * coarse.elements.len());
    }

    #[test]
    fn sliver_zone_rejected_with_name() {
        let s = boxed(vec![
            Zone::new("bulk", "m", vec![Polygon::rect(0.0, 0.0, 1.0, 1.0)]),
            Zone::new("sliver", "m", vec![Polygon::rect(0.0, 1.0, 1.0, 1.0 + 1e-5)]),
        ]);
        match triangulate(&s, 0.5, &[]) {
            Err(MeshError::ThinZone { zone, .. }) => assert_eq!(zone, "sliver"),
            other => panic!("expected thin-zone error, got {other:?}"),
        }
    }

    #[test]
    fn bad_target_rejected() {
        assert!(matches!(
            triangulate(&unit_square(), 0.0, &[]),
            Err(MeshError::BadSize(_))
        ));
    }

    fn sahand_with_wall() -> DamSection {
        let s = build_sahand_section(&SahandParams::default(), sahand_materials()).unwrap();
        let sc = Scenario::new("wall", 1600.3).with(Intervention::CutoffUnderCore {
            depth: 30.0,
            thickness: 2.0,
            material: names::CORE.into(),
        });
        apply_scenario(&s, &sc).unwrap()
    }

    #[test]
    fn sahand_wall_two_elements_across() {
        let s = sahand_with_wall();
        let m = triangulate(&s, 5.0, &[]).unwrap();
        let wall = s.zone_index("Cutoff wall under core").unwrap();
        let bed = 1560.0;
        for k in 1..30 {
            let y = bed - k as f64 + 0.37;
            let crossing = (0..m.elements.len())
                .filter(|&e| m.elements[e].zone == wall)
                .filter(|&e| {
                    let p = m.element_points(e);
                    let lo = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
                    let hi = p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max);
                    lo < y && y < hi
                })
                .count();
            assert!(crossing >= 2, "only {crossing} wall elements at y={y}");
        }
        let q = mesh_quality(&m);
        assert!(q.min_angle >= 20.0, "{q:?}");
        for z in 0..s.zones.len() {
            let want = s.zones[z].area();
            assert!((m.zone_area(z) - want).abs() <= 1e-6 * want, "zone {z}");
        }
    }

    #[test]
    fn elements_inside_their_zone() {
        let s = sahand_with_wall();
        let m = triangulate(&s, 5.0, &[]).unwrap();
        for e in 0..m.elements.len() {
            let z = &s.zones[m.elements[e].zone];
            for p in m.element_points(e) {
                assert!(z.contains(p, 1e-7));
            }
            assert!(z.contains(m.element_centroid(e), 1e-9));
        }
    }

    #[test]
    fn boundary_edges_cover_segments() {
        let s = build_sahand_section(&SahandParams::default(), sahand_materials()).unwrap();
        let m = triangulate(&s, 5.0, &[]).unwrap();
        let mut len = vec![0.0; s.boundaries.len()];
        for b in &m.boundary_edges {
            len[b.segment] += m.nodes[b.nodes[0]].dist(m.nodes[b.nodes[1]]);
        }
        for (i, seg) in s.boundaries.iter().enumerate() {
            assert!((len[i] - seg.length()).abs() < 1e-6 * seg.length(), "segment {i}");
        }
    }

    #[test]
    fn deterministic() {
        let s = sahand_with_wall();
        let a = triangulate(&s, 5.0, &[]).unwrap();
        let b = triangulate(&s, 5.0, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halving_target_adds_elements() {
        let s = build_sahand_section(&SahandParams::default(), sahand_materials()).unwrap();
        let a = triangulate(&s, 10.0, &[]).unwrap();
        let b = triangulate(&s, 5.0, &[]).unwrap();
        assert!(b.elements.len() >= a.elements.len());
    }
}
