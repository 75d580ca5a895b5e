//! Planar points and convex polygon pieces.
//!
//! Zones are stored as unions of convex pieces. Convex pieces make zone
//! insertion a matter of half-plane clipping, which stays exact enough in
//! floating point for the coordinate magnitudes used here (hundreds of meters).

use serde::{Deserialize, Serialize};

/// Pieces smaller than this (m²) are treated as empty after clipping.
pub const AREA_EPS: f64 = 1e-8;

/// Side-test tolerance for clipping and point location, in meters.
pub const LENGTH_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }
}

/// Twice the signed area of the triangle `a b c`; positive when counter-clockwise.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Distance from `p` to the segment `a b`, together with the projection parameter.
pub fn segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.dist(a), 0.0);
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    let tc = t.clamp(0.0, 1.0);
    (p.dist(a.lerp(b, tc)), t)
}

/// Intersection of segment `p q` with the infinite line through `a b`.
fn line_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let sp = orient(a, b, p);
    let sq = orient(a, b, q);
    let t = sp / (sp - sq);
    p.lerp(q, t)
}

/// A counter-clockwise polygon. Convexity is required by the clipping
/// operations, simplicity by everything else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, reversing the vertex order if it is clockwise.
    pub fn new(mut vertices: Vec<Point>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= AREA_EPS
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            a2 += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// True for a counter-clockwise polygon without reflex vertices.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            orient(a, b, c) >= -LENGTH_EPS * a.dist(b).max(b.dist(c))
        })
    }

    /// Checks that no two non-adjacent edges touch.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_touch(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Point containment for convex polygons, boundary inclusive within `tol`.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.edges().all(|(a, b)| {
            let len = a.dist(b);
            len == 0.0 || orient(a, b, p) / len >= -tol
        })
    }

    /// Keeps the part on the left of the directed line `a -> b`.
    pub fn clip_left(&self, a: Point, b: Point) -> Polygon {
        let len = a.dist(b);
        let side = |p: Point| orient(a, b, p) / len;
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 2);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let sp = side(p);
            let sq = side(q);
            if sp >= -LENGTH_EPS {
                out.push(p);
            }
            // an endpoint inside the tolerance band is already the crossing
            if (sp > LENGTH_EPS && sq < -LENGTH_EPS) || (sp < -LENGTH_EPS && sq > LENGTH_EPS) {
                out.push(line_intersection(p, q, a, b));
            }
        }
        dedup_ring(&mut out);
        Polygon { vertices: out }
    }

    /// Intersection of two convex polygons.
    pub fn intersect_convex(&self, other: &Polygon) -> Polygon {
        let mut rest = self.clone();
        for (a, b) in other.edges() {
            if rest.is_empty() {
                break;
            }
            rest = rest.clip_left(a, b);
        }
        rest
    }

    /// `self \ other` for convex polygons, as a list of convex pieces.
    pub fn subtract_convex(&self, other: &Polygon) -> Vec<Polygon> {
        if self.intersect_convex(other).is_empty() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rest = self.clone();
        for (a, b) in other.edges() {
            let outside = rest.clip_left(b, a);
            if !outside.is_empty() {
                out.push(outside);
            }
            rest = rest.clip_left(a, b);
            if rest.is_empty() {
                break;
            }
        }
        out
    }
}

pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

fn dedup_ring(v: &mut Vec<Point>) {
    v.dedup_by(|a, b| a.dist(*b) <= LENGTH_EPS);
    while v.len() > 1 && v[0].dist(v[v.len() - 1]) <= LENGTH_EPS {
        v.pop();
    }
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| segment_distance(r, p, q).0 <= LENGTH_EPS;
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}
