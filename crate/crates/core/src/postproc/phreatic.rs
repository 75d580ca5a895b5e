use serde::{Deserialize, Serialize};

use crate::fem::{shape_gradients, SeepageSolution};
use crate::geometry::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhreaticLine {
    /// Ordered upstream to downstream, `x` strictly increasing.
    pub points: Vec<Point>,
    /// No free surface: the whole domain is under positive pressure.
    pub confined: bool,
}

impl PhreaticLine {
    /// Elevation at `x` by linear interpolation, `None` outside the line.
    pub fn elevation_at(&self, x: f64) -> Option<f64> {
        let i = self.points.partition_point(|p| p.x < x);
        if i < self.points.len() && self.points[i].x == x {
            return Some(self.points[i].y);
        }
        if i == 0 || i == self.points.len() {
            return None;
        }
        let (a, b) = (self.points[i - 1], self.points[i]);
        Some(a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y))
    }

    pub fn exit_point(&self) -> Option<Point> {
        self.points.last().copied()
    }
}

/// Zero-pressure contour on the upper side of the saturated region.
///
/// Crossings are taken on element edges where pressure decreases upward; at
/// coincident abscissae the highest crossing is kept.
pub fn phreatic_line(solution: &SeepageSolution) -> PhreaticLine {
    let mesh = &solution.mesh;
    let p = &solution.head_field.pressure_head;
    if p.iter().all(|&v| v >= 0.0) {
        return PhreaticLine {
            points: Vec::new(),
            confined: true,
        };
    }
    let mut pts = Vec::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        let q = el.nodes.map(|n| p[n]);
        let (lo, hi) = (q[0].min(q[1]).min(q[2]), q[0].max(q[1]).max(q[2]));
        if lo > 0.0 || hi < 0.0 || lo == hi {
            continue;
        }
        let xy = mesh.element_points(e);
        let Ok((_, c, area)) = shape_gradients(xy) else {
            continue;
        };
        let dpdy = (c[0] * q[0] + c[1] * q[1] + c[2] * q[2]) / (2.0 * area);
        if dpdy >= 0.0 {
            continue;
        }
        for i in 0..3 {
            let j = (i + 1) % 3;
            let (pa, pb) = (q[i], q[j]);
            if pa == 0.0 {
                pts.push(xy[i]);
            } else if pa * pb < 0.0 {
                pts.push(xy[i].lerp(xy[j], pa / (pa - pb)));
            }
        }
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(b.y.total_cmp(&a.y)));
    let mut points: Vec<Point> = Vec::with_capacity(pts.len());
    for q in pts {
        match points.last() {
            Some(last) if q.x <= last.x => {}
            _ => points.push(q),
        }
    }
    PhreaticLine {
        points,
        confined: false,
    }
}
