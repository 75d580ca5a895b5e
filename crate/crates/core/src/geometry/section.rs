use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::{split_at_vertices, SectionGraph, VertexPool};
use super::polygon::{Point, Polygon, AREA_EPS};
use super::sahand::SahandParams;
use super::GeometryError;
use crate::material::MaterialProperties;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    /// Name of an entry in the owning section's material table.
    pub material: String,
    /// Convex, counter-clockwise, interior-disjoint pieces.
    pub pieces: Vec<Polygon>,
}

impl Zone {
    pub fn new(name: impl Into<String>, material: impl Into<String>, pieces: Vec<Polygon>) -> Self {
        Self {
            name: name.into(),
            material: material.into(),
            pieces,
        }
    }

    pub fn area(&self) -> f64 {
        self.pieces.iter().map(Polygon::area).sum()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.pieces.iter().any(|piece| piece.contains(p, tol))
    }

    /// Rough thickness of the thinnest piece: 2·area / perimeter.
    pub fn thickness(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| 2.0 * p.area() / p.perimeter())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Prescribed total head, m a.s.l.
    FixedHead { head: f64 },
    Impermeable,
    /// Candidate outflow face: head = elevation where water exits.
    SeepageFace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub polyline: Vec<Point>,
    pub condition: BoundaryCondition,
}

impl BoundarySegment {
    pub fn new(polyline: Vec<Point>, condition: BoundaryCondition) -> Self {
        Self {
            polyline,
            condition,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.polyline.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DamSection {
    pub materials: Vec<MaterialProperties>,
    pub zones: Vec<Zone>,
    pub boundaries: Vec<BoundarySegment>,
    /// m a.s.l.
    pub crest_elevation: f64,
    /// m a.s.l.
    pub bed_elevation: f64,
    /// m below bed.
    pub foundation_depth: f64,
    /// m, for per-meter to total discharge conversion.
    pub crest_length: f64,
    /// m, horizontal extent of the model.
    pub domain_width: f64,
    /// Parameters the section was generated from, when parametric.
    pub params: Option<SahandParams>,
}

impl DamSection {
    pub fn material(&self, name: &str) -> Option<&MaterialProperties> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn zone_index(&self, name: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.name == name)
    }

    /// Saturated permeability (m/s) for every zone, in zone order.
    pub fn zone_conductivities(&self) -> Result<Vec<f64>, GeometryError> {
        self.zones
            .iter()
            .map(|z| {
                self.material(&z.material)
                    .map(MaterialProperties::k_m_per_s)
                    .ok_or_else(|| GeometryError::UnknownMaterial {
                        zone: z.name.clone(),
                        material: z.material.clone(),
                    })
            })
            .collect()
    }

    pub fn total_zone_area(&self) -> f64 {
        self.zones.iter().map(Zone::area).sum()
    }

    pub fn graph(&self) -> SectionGraph {
        SectionGraph::build(&self.zones)
    }

    /// Outer boundary of the zone union as a polygon.
    pub fn hull_polygon(&self) -> Polygon {
        let g = self.graph();
        let loops = g.boundary_loops();
        let outer = loops
            .into_iter()
            .map(|l| l.into_iter().map(|i| g.vertices[i]).collect::<Vec<_>>())
            .max_by(|a, b| {
                super::polygon::signed_area(a).total_cmp(&super::polygon::signed_area(b))
            })
            .unwrap_or_default();
        Polygon { vertices: outer }
    }

    /// Every point of every zone piece and boundary polyline.
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for z in &self.zones {
            for p in &z.pieces {
                let (a, b) = p.bbox();
                lo.x = lo.x.min(a.x);
                lo.y = lo.y.min(a.y);
                hi.x = hi.x.max(b.x);
                hi.y = hi.y.max(b.y);
            }
        }
        (lo, hi)
    }

    /// Checks zone, partition and boundary-coverage invariants.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.zones.is_empty() {
            return Err(GeometryError::Invalid("section has no zones".into()));
        }
        if !(self.foundation_depth >= 0.0) {
            return Err(GeometryError::Invalid(format!(
                "foundation depth must be >= 0, got {}",
                self.foundation_depth
            )));
        }
        for m in &self.materials {
            m.validate()
                .map_err(|e| GeometryError::Invalid(e.to_string()))?;
        }
        self.zone_conductivities()?;
        let mut pieces: Vec<(usize, &Polygon)> = Vec::new();
        for z in &self.zones {
            if z.pieces.is_empty() {
                return Err(GeometryError::Invalid(format!("zone '{}' is empty", z.name)));
            }
            for p in &z.pieces {
                if p.signed_area() <= AREA_EPS || !p.is_convex() || !p.is_simple() {
                    return Err(GeometryError::Invalid(format!(
                        "zone '{}' has a degenerate, clockwise or non-convex piece",
                        z.name
                    )));
                }
                pieces.push((pieces.len(), p));
            }
        }
        for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                let a = pieces[i].1.intersect_convex(pieces[j].1).area();
                if a > AREA_EPS {
                    return Err(GeometryError::Overlap(format!(
                        "pieces {i} and {j} overlap by {a:.3e} m²"
                    )));
                }
            }
        }
        // union connectivity over pieces
        let g = SectionGraph::from_pieces(&pieces, &[]);
        let mut parent: Vec<usize> = (0..pieces.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        for e in &g.edges {
            if let (Some(l), Some(r)) = (e.left, e.right) {
                let (a, b) = (find(&mut parent, l), find(&mut parent, r));
                parent[a] = b;
            }
        }
        let root = find(&mut parent, 0);
        if (0..pieces.len()).any(|i| find(&mut parent, i) != root) {
            return Err(GeometryError::Invalid("zone union is not connected".into()));
        }
        self.check_boundary_coverage()
    }

    /// Every exterior edge must be covered by exactly one boundary segment.
    pub fn check_boundary_coverage(&self) -> Result<(), GeometryError> {
        let extra: Vec<Point> = self
            .boundaries
            .iter()
            .flat_map(|s| s.polyline.iter().copied())
            .collect();
        let g = SectionGraph::build_with_points(&self.zones, &extra);
        let exterior: BTreeSet<(usize, usize)> = g
            .exterior_edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();

        let mut pool = VertexPool::default();
        for &v in &g.vertices {
            pool.insert(v);
        }
        let mut covered: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (sid, seg) in self.boundaries.iter().enumerate() {
            if seg.polyline.len() < 2 {
                return Err(GeometryError::Boundary(format!("segment {sid} has < 2 points")));
            }
            for (p, q) in seg.edges() {
                let a = pool.insert(p);
                let b = pool.insert(q);
                if a >= g.vertices.len() || b >= g.vertices.len() {
                    return Err(GeometryError::Boundary(format!(
                        "segment {sid} leaves the zone boundary"
                    )));
                }
                for (u, v) in split_at_vertices(&g.vertices, a, b) {
                    let key = (u.min(v), u.max(v));
                    if !exterior.contains(&key) {
                        return Err(GeometryError::Boundary(format!(
                            "segment {sid} runs along a non-exterior edge"
                        )));
                    }
                    if !covered.insert(key) {
                        return Err(GeometryError::Boundary(format!(
                            "exterior edge covered twice (segment {sid})"
                        )));
                    }
                }
            }
        }
        if covered.len() != exterior.len() {
            return Err(GeometryError::Boundary(format!(
                "{} of {} exterior edges have no boundary condition",
                exterior.len() - covered.len(),
                exterior.len()
            )));
        }
        Ok(())
    }
}

/// Tagged seepage-control measures applied to a parametric section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Intervention {
    /// Vertical wall attached to the core base.
    CutoffUnderCore {
        depth: f64,
        thickness: f64,
        material: String,
    },
    /// Vertical wall through the upstream shell into the foundation.
    CutoffUpstreamHeel {
        depth: f64,
        thickness: f64,
        material: String,
        /// Shell height (m) above the bed at the wall's upstream face.
        #[serde(default = "default_shell_penetration")]
        shell_penetration: f64,
    },
    /// Skin of the given normal thickness along the upstream face.
    ConcreteCover { thickness: f64, material: String },
    /// Layer on the reservoir bottom extending upstream from the heel.
    ClayBlanket {
        thickness: f64,
        length: f64,
        material: String,
    },
    /// Core material layer at the base of the upstream shell, running
    /// upstream from the core; `length` defaults to reaching the heel.
    CoreExtension {
        #[serde(default)]
        length: Option<f64>,
        thickness: f64,
        material: String,
    },
    /// Drain layer under the downstream shell from the chimney drain to the toe.
    BlanketDrain { depth: f64, material: String },
    /// Toe trench below the downstream toe.
    ClawDrain {
        depth: f64,
        #[serde(default = "default_claw_width")]
        width: f64,
        material: String,
    },
    FoundationDepthOverride { depth: f64 },
}

fn default_shell_penetration() -> f64 {
    20.0
}

fn default_claw_width() -> f64 {
    10.0
}

impl Intervention {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::CutoffUnderCore { .. } => "cutoff_under_core",
            Self::CutoffUpstreamHeel { .. } => "cutoff_upstream_heel",
            Self::ConcreteCover { .. } => "concrete_cover",
            Self::ClayBlanket { .. } => "clay_blanket",
            Self::CoreExtension { .. } => "core_extension",
            Self::BlanketDrain { .. } => "blanket_drain",
            Self::ClawDrain { .. } => "claw_drain",
            Self::FoundationDepthOverride { .. } => "foundation_depth_override",
        }
    }

    pub fn material(&self) -> Option<&str> {
        match self {
            Self::CutoffUnderCore { material, .. }
            | Self::CutoffUpstreamHeel { material, .. }
            | Self::ConcreteCover { material, .. }
            | Self::ClayBlanket { material, .. }
            | Self::CoreExtension { material, .. }
            | Self::BlanketDrain { material, .. }
            | Self::ClawDrain { material, .. } => Some(material),
            Self::FoundationDepthOverride { .. } => None,
        }
    }

    /// Application order; walls come last so they pierce layered measures.
    pub(crate) fn rank(&self) -> u8 {
        match self {
            Self::FoundationDepthOverride { .. } => 0,
            Self::BlanketDrain { .. } => 1,
            Self::ClawDrain { .. } => 2,
            Self::ConcreteCover { .. } => 3,
            Self::CoreExtension { .. } => 4,
            Self::ClayBlanket { .. } => 5,
            Self::CutoffUnderCore { .. } => 6,
            Self::CutoffUpstreamHeel { .. } => 7,
        }
    }

    pub(crate) fn is_wall(&self) -> bool {
        matches!(
            self,
            Self::CutoffUnderCore { .. } | Self::CutoffUpstreamHeel { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// m a.s.l.
    pub reservoir_level: f64,
    /// m a.s.l.; defaults to the bed elevation.
    #[serde(default)]
    pub tailwater_level: Option<f64>,
    #[serde(default)]
    pub interventions: Vec<Intervention>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, reservoir_level: f64) -> Self {
        Self {
            name: name.into(),
            reservoir_level,
            tailwater_level: None,
            interventions: Vec::new(),
        }
    }

    pub fn with(mut self, intervention: Intervention) -> Self {
        self.interventions.push(intervention);
        self
    }

    pub fn validate(&self, section: &DamSection) -> Result<(), GeometryError> {
        if self.reservoir_level > section.crest_elevation {
            return Err(GeometryError::Invalid(format!(
                "reservoir level {} above crest {}",
                self.reservoir_level, section.crest_elevation
            )));
        }
        if let Some(tw) = self.tailwater_level {
            if self.reservoir_level < tw {
                return Err(GeometryError::Invalid(format!(
                    "reservoir level {} below tailwater {tw}",
                    self.reservoir_level
                )));
            }
        }
        let mut kinds = BTreeSet::new();
        for i in &self.interventions {
            if !kinds.insert(i.kind()) {
                return Err(GeometryError::Invalid(format!(
                    "intervention '{}' appears more than once",
                    i.kind()
                )));
            }
            if let Some(m) = i.material() {
                if section.material(m).is_none() {
                    return Err(GeometryError::UnknownMaterial {
                        zone: i.kind().to_string(),
                        material: m.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}
