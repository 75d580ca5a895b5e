//! Engineering quantities and flow-net exports from a converged solve.

mod phreatic;
pub mod svg;
pub mod vtk;

use std::io;

use serde::{Deserialize, Serialize};

use crate::fem::{dirichlet_reaction_flux, element_gradient, FemError, NodeBc, SeepageSolution};
use crate::geometry::polygon::orient;
use crate::geometry::{DamSection, Point};
use crate::mesh::Mesh;

pub use phreatic::{phreatic_line, PhreaticLine};

#[derive(Debug, thiserror::Error)]
pub enum PostprocError {
    #[error("point ({x}, {y}) lies outside the mesh")]
    OutsideDomain { x: f64, y: f64 },
    #[error("solution not converged: {0}")]
    Unconverged(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Barycentric coordinates of `p` in element `e`.
fn barycentric(mesh: &Mesh, e: usize, p: Point) -> [f64; 3] {
    let [a, b, c] = mesh.element_points(e);
    let d = orient(a, b, c);
    let l0 = orient(p, b, c) / d;
    let l1 = orient(a, p, c) / d;
    [l0, l1, 1.0 - l0 - l1]
}

/// Element containing `p` (the most interior candidate) with its barycentric
/// coordinates.
pub fn locate(mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for e in 0..mesh.elements.len() {
        let [a, b, c] = mesh.element_points(e);
        let pad = 1e-9 * mesh.target_size.max(1.0);
        if p.x < a.x.min(b.x).min(c.x) - pad
            || p.x > a.x.max(b.x).max(c.x) + pad
            || p.y < a.y.min(b.y).min(c.y) - pad
            || p.y > a.y.max(b.y).max(c.y) + pad
        {
            continue;
        }
        let l = barycentric(mesh, e, p);
        let m = l[0].min(l[1]).min(l[2]);
        if best.as_ref().map_or(true, |b| m > b.2) {
            best = Some((e, l, m));
        }
    }
    match best {
        Some((e, l, m)) if m >= -1e-9 => Some((e, l)),
        _ => None,
    }
}

/// Linearly interpolated total head at `p`.
pub fn probe_head(solution: &SeepageSolution, p: Point) -> Result<f64, PostprocError> {
    let mesh = &solution.mesh;
    let (e, l) = locate(mesh, p).ok_or(PostprocError::OutsideDomain { x: p.x, y: p.y })?;
    let h = solution.head();
    let [a, b, c] = mesh.elements[e].nodes;
    Ok(l[0] * h[a] + l[1] * h[b] + l[2] * h[c])
}

/// A body piezometer reading. Names follow `I<chainage>-<U|D><offset>`,
/// e.g. `I260-D30.4` lies 30.4 m downstream of the axis at chainage 260.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiezometerRecord {
    pub name: String,
    pub location: Point,
    /// Level in the instrument datum, m.
    #[serde(default)]
    pub observed_level: f64,
    /// Added to instrument levels to obtain m a.s.l.
    #[serde(default)]
    pub datum_offset: f64,
}

impl PiezometerRecord {
    pub fn validate(&self) -> Result<(), PostprocError> {
        if !self.datum_offset.is_finite() || !self.observed_level.is_finite() {
            return Err(PostprocError::Parse(format!(
                "piezometer {}: level and datum offset must be finite",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DischargeReport {
    pub scenario_id: String,
    /// m³/s per m of crest.
    pub q_per_meter: f64,
    /// m.
    pub crest_length: f64,
    /// L/s.
    pub q_total_lps: f64,
}

impl DischargeReport {
    pub fn new(scenario_id: impl Into<String>, q_per_meter: f64, crest_length: f64) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            q_per_meter,
            crest_length,
            q_total_lps: q_per_meter * (crest_length * 1000.0),
        }
    }
}

/// Total Dirichlet inflow of a converged solution, scaled to the crest.
pub fn total_discharge(
    solution: &SeepageSolution,
    section: &DamSection,
    scenario_id: &str,
) -> Result<DischargeReport, PostprocError> {
    let flux = dirichlet_reaction_flux(solution).map_err(|e| match e {
        FemError::Unconverged(m) => PostprocError::Unconverged(m),
        other => PostprocError::Fem(other),
    })?;
    let q: f64 = flux.iter().map(|&(_, r)| r).filter(|&r| r > 0.0).sum();
    Ok(DischargeReport::new(scenario_id, q, section.crest_length))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    /// Per element `grad h`.
    pub gradient: Vec<[f64; 2]>,
    pub magnitude: Vec<f64>,
    /// Darcy flux `-k_sat k_r grad h`, m/s.
    pub velocity: Vec<[f64; 2]>,
}

pub fn gradient_field(solution: &SeepageSolution) -> GradientField {
    let mesh = &solution.mesh;
    let h = solution.head();
    let ne = mesh.elements.len();
    let mut gradient = Vec::with_capacity(ne);
    let mut magnitude = Vec::with_capacity(ne);
    let mut velocity = Vec::with_capacity(ne);
    for (e, el) in mesh.elements.iter().enumerate() {
        let g = element_gradient(mesh.element_points(e), el.nodes.map(|n| h[n]))
            .expect("mesh elements are counter-clockwise");
        let k = solution.element_conductivity(e);
        gradient.push(g);
        magnitude.push(g[0].hypot(g[1]));
        velocity.push([-k * g[0], -k * g[1]]);
    }
    GradientField {
        gradient,
        magnitude,
        velocity,
    }
}

impl GradientField {
    /// Largest gradient among fully saturated elements.
    pub fn max_saturated(&self, solution: &SeepageSolution) -> Option<(usize, f64)> {
        self.magnitude
            .iter()
            .enumerate()
            .filter(|&(e, _)| solution.head_field.saturation[e] >= 1.0)
            .map(|(e, &m)| (e, m))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitGradient {
    pub value: f64,
    pub element: usize,
}

/// Largest gradient over elements touching a node where water leaves the
/// domain (tailwater or active seepage face with outward reaction).
pub fn exit_gradient(solution: &SeepageSolution, field: &GradientField) -> Option<ExitGradient> {
    let mesh = &solution.mesh;
    let mut exit = vec![false; mesh.nodes.len()];
    for n in solution.dirichlet_nodes() {
        let downstream = matches!(solution.node_bc[n], NodeBc::SeepageFace | NodeBc::Fixed(_));
        if downstream && solution.boundary_flux[n] < 0.0 {
            exit[n] = true;
        }
    }
    mesh.elements
        .iter()
        .enumerate()
        .filter(|(_, el)| el.nodes.iter().any(|&n| exit[n]))
        .map(|(e, _)| ExitGradient {
            value: field.magnitude[e],
            element: e,
        })
        .max_by(|a, b| a.value.total_cmp(&b.value))
}

/// Flow through the vertical line `x = x0` in the `+x` direction, m³/s per m,
/// from element Darcy fluxes.
pub fn cut_line_discharge(solution: &SeepageSolution, field: &GradientField, x0: f64) -> f64 {
    let mesh = &solution.mesh;
    let mut q = 0.0;
    for e in 0..mesh.elements.len() {
        let p = mesh.element_points(e);
        let mut ys = Vec::with_capacity(3);
        let mut on_line = 0;
        for i in 0..3 {
            let (a, b) = (p[i], p[(i + 1) % 3]);
            if a.x == x0 {
                ys.push(a.y);
                on_line += 1;
            }
            if (a.x - x0) * (b.x - x0) < 0.0 {
                let t = (x0 - a.x) / (b.x - a.x);
                ys.push(a.y + t * (b.y - a.y));
            }
        }
        if ys.len() < 2 {
            continue;
        }
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // an edge lying on the line is shared by two elements
        let w = if on_line == 2 { 0.5 } else { 1.0 };
        q += w * (hi - lo) * field.velocity[e][0];
    }
    q
}

#[cfg(test)]
mod tests;
