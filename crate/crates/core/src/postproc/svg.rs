//! SVG flow-net drawing: zones, equipotentials, phreatic line, flux glyphs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{gradient_field, phreatic_line};
use crate::fem::SeepageSolution;
use crate::geometry::{DamSection, Point};
use crate::material::names;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvgOptions {
    /// Drawing width in pixels; height follows the section aspect ratio.
    pub width_px: f64,
    pub equipotentials: usize,
    /// Upper bound on the number of flux arrows.
    pub glyphs: usize,
    /// Fill color per material name; unlisted materials fall back to gray.
    pub palette: BTreeMap<String, String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        let palette = [
            (names::UPSTREAM_SHELL, "#c9b48a"),
            (names::DOWNSTREAM_SHELL, "#c2ad84"),
            (names::CORE, "#8c6d4f"),
            (names::STONE_FOUNDATION, "#9e9e9e"),
            (names::FILTER, "#e3d6a4"),
            (names::DRAIN, "#f0e6c0"),
            (names::BOTTOM_WASTE, "#b39b7a"),
            (names::CONCRETE, "#d0d0d0"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect();
        Self {
            width_px: 1600.0,
            equipotentials: 15,
            glyphs: 300,
            palette,
        }
    }
}

struct View {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl View {
    fn pt(&self, p: Point) -> (f64, f64) {
        ((p.x - self.x0) * self.scale, (self.y1 - p.y) * self.scale)
    }
}

/// Contour segments of the nodal field `f` at `level` over the elements in `keep`.
fn contour(solution: &SeepageSolution, f: &[f64], level: f64, keep: &[bool]) -> Vec<(Point, Point)> {
    let mesh = &solution.mesh;
    let mut out = Vec::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        if !keep[e] {
            continue;
        }
        let xy = mesh.element_points(e);
        let v = el.nodes.map(|n| f[n] - level);
        let mut cut = Vec::with_capacity(2);
        for i in 0..3 {
            let j = (i + 1) % 3;
            if (v[i] < 0.0) != (v[j] < 0.0) {
                cut.push(xy[i].lerp(xy[j], v[i] / (v[i] - v[j])));
            }
        }
        if cut.len() == 2 {
            out.push((cut[0], cut[1]));
        }
    }
    out
}

pub fn render_svg(solution: &SeepageSolution, section: &DamSection, opts: &SvgOptions) -> String {
    let mesh = &solution.mesh;
    let (lo, hi) = section.bbox();
    let scale = opts.width_px / (hi.x - lo.x);
    let view = View {
        x0: lo.x,
        y1: hi.y,
        scale,
    };
    let height = (hi.y - lo.y) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.1}" height="{:.1}" viewBox="0 0 {:.3} {:.3}">"##,
        opts.width_px, height, opts.width_px, height
    );
    s.push_str(concat!(
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="4" markerHeight="4" orient="auto">"##,
        r##"<path d="M0,0 L10,5 L0,10 z" fill="#1f4e9c"/></marker></defs>"##,
        "\n"
    ));

    s.push_str("<g id=\"zones\" stroke=\"#555\" stroke-width=\"0.5\">\n");
    for zone in &section.zones {
        let fill = opts
            .palette
            .get(&zone.material)
            .map_or("#bdbdbd", String::as_str);
        for piece in &zone.pieces {
            let pts: Vec<String> = piece
                .vertices
                .iter()
                .map(|&p| {
                    let (x, y) = view.pt(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polygon class="zone" data-zone="{}" fill="{fill}" points="{}"/>"##,
                escape(&zone.name),
                pts.join(" ")
            );
        }
    }
    s.push_str("</g>\n");

    let saturated: Vec<bool> = solution
        .head_field
        .saturation
        .iter()
        .map(|&k| k >= 1.0)
        .collect();
    if opts.equipotentials > 0 {
        let h = solution.head();
        let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
        let hmax = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.push_str("<g id=\"equipotentials\" stroke=\"#2a6fdb\" stroke-width=\"0.8\" fill=\"none\">\n");
        let n = opts.equipotentials;
        for i in 1..=n {
            let level = hmin + (hmax - hmin) * i as f64 / (n + 1) as f64;
            let mut d = String::new();
            for (a, b) in contour(solution, h, level, &saturated) {
                let (ax, ay) = view.pt(a);
                let (bx, by) = view.pt(b);
                let _ = write!(d, "M{ax:.2},{ay:.2}L{bx:.2},{by:.2}");
            }
            let _ = writeln!(s, r##"<path class="equipotential" data-head="{level:.4}" d="{d}"/>"##);
        }
        s.push_str("</g>\n");
    }

    let line = phreatic_line(solution);
    if !line.points.is_empty() {
        let pts: Vec<String> = line
            .points
            .iter()
            .map(|&p| {
                let (x, y) = view.pt(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline id="phreatic" fill="none" stroke="#0b3d91" stroke-width="1.6" points="{}"/>"##,
            pts.join(" ")
        );
    }

    if opts.glyphs > 0 {
        let field = gradient_field(solution);
        let wet: Vec<usize> = (0..mesh.elements.len()).filter(|&e| saturated[e]).collect();
        let stride = wet.len().div_ceil(opts.glyphs).max(1);
        s.push_str("<g id=\"velocity\" stroke=\"#1f4e9c\" stroke-width=\"0.7\">\n");
        for &e in wet.iter().step_by(stride) {
            let v = field.velocity[e];
            let m = v[0].hypot(v[1]);
            if m == 0.0 {
                continue;
            }
            let c = mesh.element_centroid(e);
            let len = (2.0 * mesh.element_area(e)).sqrt() * 0.8;
            let tip = Point::new(c.x + len * v[0] / m, c.y + len * v[1] / m);
            let (ax, ay) = view.pt(c);
            let (bx, by) = view.pt(tip);
            let _ = writeln!(
                s,
                r##"<line class="glyph" x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" marker-end="url(#arrow)"/>"##
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
