//! Noding of zone pieces into a planar straight-line graph.
//!
//! Piece vertices are merged within [`SNAP_TOL`], every piece edge is split
//! at vertices lying on it, and each resulting edge records the zone on its
//! left and right. Edges with no zone on one side form the exterior boundary.

use std::collections::BTreeMap;

use super::polygon::{segment_distance, Point, Polygon};
use super::section::Zone;

/// Vertices closer than this are merged (m).
pub const SNAP_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// Zone to the left of `a -> b`.
    pub left: Option<usize>,
    /// Zone to the right of `a -> b`.
    pub right: Option<usize>,
}

impl GraphEdge {
    pub fn is_exterior(&self) -> bool {
        self.left.is_none() || self.right.is_none()
    }

    pub fn is_interface(&self) -> bool {
        matches!((self.left, self.right), (Some(l), Some(r)) if l != r)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SectionGraph {
    pub vertices: Vec<Point>,
    pub edges: Vec<GraphEdge>,
}

/// Merges nearly coincident points, preserving first-seen order.
#[derive(Default)]
pub struct VertexPool {
    pub points: Vec<Point>,
    grid: BTreeMap<(i64, i64), Vec<usize>>,
}

impl VertexPool {
    const CELL: f64 = 1e-3;

    fn key(p: Point) -> (i64, i64) {
        ((p.x / Self::CELL).floor() as i64, (p.y / Self::CELL).floor() as i64)
    }

    pub fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if self.points[id].dist(p) <= SNAP_TOL {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.grid.entry((kx, ky)).or_default().push(id);
        id
    }
}

impl SectionGraph {
    pub fn build(zones: &[Zone]) -> Self {
        Self::build_with_points(zones, &[])
    }

    /// Like [`SectionGraph::build`], additionally splitting edges at `extra`
    /// points that lie on them.
    pub fn build_with_points(zones: &[Zone], extra: &[Point]) -> Self {
        let labelled: Vec<(usize, &Polygon)> = zones
            .iter()
            .enumerate()
            .flat_map(|(zid, z)| z.pieces.iter().map(move |p| (zid, p)))
            .collect();
        Self::from_pieces(&labelled, extra)
    }

    /// Graph of arbitrary labelled pieces; edge sides carry the labels.
    pub fn from_pieces(pieces: &[(usize, &Polygon)], extra: &[Point]) -> Self {
        let mut pool = VertexPool::default();
        let mut raw: Vec<(usize, usize, usize)> = Vec::new();
        for &(label, piece) in pieces {
            let ids: Vec<usize> = piece.vertices.iter().map(|&p| pool.insert(p)).collect();
            let n = ids.len();
            for i in 0..n {
                let (a, b) = (ids[i], ids[(i + 1) % n]);
                if a != b {
                    raw.push((a, b, label));
                }
            }
        }
        for &p in extra {
            pool.insert(p);
        }
        let vertices = pool.points;

        // split at vertices lying in edge interiors
        let mut split: Vec<(usize, usize, usize)> = Vec::new();
        for &(a, b, z) in &raw {
            for (p, q) in split_at_vertices(&vertices, a, b) {
                split.push((p, q, z));
            }
        }

        // pair directed half-edges: a -> b with zone on the left
        let mut map: BTreeMap<(usize, usize), GraphEdge> = BTreeMap::new();
        for (a, b, z) in split {
            let (key, left_side) = if a < b { ((a, b), true) } else { ((b, a), false) };
            let e = map.entry(key).or_insert(GraphEdge {
                a: key.0,
                b: key.1,
                left: None,
                right: None,
            });
            if left_side {
                e.left = Some(z);
            } else {
                e.right = Some(z);
            }
        }
        Self {
            vertices,
            edges: map.into_values().collect(),
        }
    }

    /// Exterior edges oriented with the domain on their left.
    pub fn exterior_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.is_exterior())
            .map(|e| if e.left.is_some() { (e.a, e.b) } else { (e.b, e.a) })
            .collect()
    }

    /// Exterior edges chained into closed counter-clockwise loops.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let ext = self.exterior_edges();
        let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &(a, _)) in ext.iter().enumerate() {
            outgoing.entry(a).or_default().push(i);
        }
        let mut used = vec![false; ext.len()];
        let mut loops = Vec::new();
        for start in 0..ext.len() {
            if used[start] {
                continue;
            }
            let mut ring = Vec::new();
            let mut cur = start;
            loop {
                used[cur] = true;
                let (a, b) = ext[cur];
                ring.push(a);
                let next = outgoing
                    .get(&b)
                    .and_then(|c| c.iter().copied().find(|&i| !used[i]));
                match next {
                    Some(n) => cur = n,
                    None => break,
                }
            }
            loops.push(ring);
        }
        loops
    }
}

/// Splits the segment between vertices `a` and `b` at every other vertex
/// lying on it, returning consecutive vertex pairs from `a` to `b`.
pub fn split_at_vertices(vertices: &[Point], a: usize, b: usize) -> Vec<(usize, usize)> {
    let pa = vertices[a];
    let pb = vertices[b];
    let (lo_x, hi_x) = (pa.x.min(pb.x) - SNAP_TOL, pa.x.max(pb.x) + SNAP_TOL);
    let (lo_y, hi_y) = (pa.y.min(pb.y) - SNAP_TOL, pa.y.max(pb.y) + SNAP_TOL);
    let mut on: Vec<(f64, usize)> = vertices
        .iter()
        .enumerate()
        .filter(|&(i, p)| {
            i != a && i != b && p.x >= lo_x && p.x <= hi_x && p.y >= lo_y && p.y <= hi_y
        })
        .filter_map(|(i, &p)| {
            let (d, t) = segment_distance(p, pa, pb);
            (d <= SNAP_TOL && t > 0.0 && t < 1.0).then_some((t, i))
        })
        .collect();
    on.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::with_capacity(on.len() + 1);
    let mut prev = a;
    for (_, i) in on {
        out.push((prev, i));
        prev = i;
    }
    out.push((prev, b));
    out
}
