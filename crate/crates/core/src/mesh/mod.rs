//! Zone-tagged linear triangle meshes.

mod triangulate;

use std::io::{self, BufRead, Write};

use crate::geometry::Point;

pub use triangulate::{triangulate, triangulate_with, MeshOptions, RefinementRegion};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("target size must be positive and finite, got {0}")]
    BadSize(f64),
    #[error("zone '{zone}' could not be resolved: {reason}")]
    ThinZone { zone: String, reason: String },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("mesh boundary edge {0:?} is not covered by any boundary segment")]
    UncoveredBoundary([usize; 2]),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Element {
    /// Counter-clockwise node indices.
    pub nodes: [usize; 3],
    pub zone: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    /// Index into the section's boundary segments.
    pub segment: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub elements: Vec<Element>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub target_size: f64,
    pub zone_names: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityReport {
    /// Degrees.
    pub min_angle: f64,
    /// Circumradius over twice the inradius; 1 for an equilateral triangle.
    pub max_aspect: f64,
    pub element_count: usize,
}

impl Mesh {
    pub fn element_points(&self, e: usize) -> [Point; 3] {
        self.elements[e].nodes.map(|n| self.nodes[n])
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_points(e);
        0.5 * crate::geometry::polygon::orient(a, b, c)
    }

    pub fn element_centroid(&self, e: usize) -> Point {
        let [a, b, c] = self.element_points(e);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn zone_area(&self, zone: usize) -> f64 {
        (0..self.elements.len())
            .filter(|&e| self.elements[e].zone == zone)
            .map(|e| self.element_area(e))
            .sum()
    }

    /// Element indices touching each node.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, el) in self.elements.iter().enumerate() {
            for &n in &el.nodes {
                out[n].push(i);
            }
        }
        out
    }

    /// Writes `N x y` and `E n1 n2 n3 zone` records.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.nodes {
            writeln!(w, "N {:.17e} {:.17e}", p.x, p.y)?;
        }
        for e in &self.elements {
            let [a, b, c] = e.nodes;
            writeln!(w, "E {a} {b} {c} {}", e.zone)?;
        }
        Ok(())
    }

    /// Reads the dump format back. Boundary edges and zone names are not
    /// part of the format and come back empty.
    pub fn read_dump<R: BufRead>(r: R) -> io::Result<Mesh> {
        let bad = |line: usize, msg: &str| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
        };
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("N") => {
                    let v: Vec<f64> = it
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad(i + 1, "bad node coordinate"))?;
                    if v.len() != 2 {
                        return Err(bad(i + 1, "node needs 2 coordinates"));
                    }
                    nodes.push(Point::new(v[0], v[1]));
                }
                Some("E") => {
                    let v: Vec<usize> = it
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad(i + 1, "bad element index"))?;
                    if v.len() != 4 {
                        return Err(bad(i + 1, "element needs 3 nodes and a zone"));
                    }
                    elements.push(Element {
                        nodes: [v[0], v[1], v[2]],
                        zone: v[3],
                    });
                }
                None => {}
                Some(_) => return Err(bad(i + 1, "unknown record")),
            }
        }
        Ok(Mesh {
            nodes,
            elements,
            boundary_edges: Vec::new(),
            target_size: 0.0,
            zone_names: Vec::new(),
        })
    }
}

/// Interior angles of a triangle in degrees.
pub fn triangle_angles(p: [Point; 3]) -> [f64; 3] {
    let ang = |a: Point, b: Point, c: Point| {
        let (ux, uy) = (b.x - a.x, b.y - a.y);
        let (vx, vy) = (c.x - a.x, c.y - a.y);
        (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy).to_degrees()
    };
    [
        ang(p[0], p[1], p[2]),
        ang(p[1], p[2], p[0]),
        ang(p[2], p[0], p[1]),
    ]
}

fn aspect(p: [Point; 3]) -> f64 {
    let a = p[1].dist(p[2]);
    let b = p[2].dist(p[0]);
    let c = p[0].dist(p[1]);
    let area = 0.5 * crate::geometry::polygon::orient(p[0], p[1], p[2]).abs();
    if area == 0.0 {
        return f64::INFINITY;
    }
    let s = 0.5 * (a + b + c);
    let r_in = area / s;
    let r_circ = a * b * c / (4.0 * area);
    r_circ / (2.0 * r_in)
}

pub fn mesh_quality(mesh: &Mesh) -> QualityReport {
    let mut min_angle = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    for e in 0..mesh.elements.len() {
        let p = mesh.element_points(e);
        for a in triangle_angles(p) {
            min_angle = min_angle.min(a);
        }
        max_aspect = max_aspect.max(aspect(p));
    }
    QualityReport {
        min_angle,
        max_aspect,
        element_count: mesh.elements.len(),
    }
}
