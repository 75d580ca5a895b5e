//! Steady Darcy flow on linear triangles with a fixed-mesh free surface.
//!
//! The unconfined solve is a Picard iteration: element conductivities are
//! scaled by a relative permeability ramp of the centroid pressure head, the
//! linear system is solved, and heads are mixed with Anderson acceleration
//! (depth 5, damping `relax`). Seepage-face nodes
//! switch between prescribed `h = y` and no-flow according to the sign of
//! their reaction and their head.

mod element;
mod pcg;
mod sparse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryCondition, BoundarySegment, DamSection};
use crate::mesh::Mesh;

pub use element::{element_conductance, element_gradient, shape_gradients};
pub use pcg::{pcg, solve_spd, Ic0, PcgOutcome, Preconditioner};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("degenerate element with area {area}")]
    DegenerateElement { area: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no fixed-head boundary in the problem")]
    NoFixedHead,
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("linear solver stopped after {iterations} iterations, residual history {residual_history:?}")]
    LinearSolver {
        iterations: usize,
        residual_history: Vec<f64>,
    },
    #[error("solution did not converge: {0}")]
    Unconverged(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Damping of the Anderson head update, in (0, 1].
    pub relax: f64,
    /// Outer convergence threshold on the largest head change, m.
    pub tol_head: f64,
    pub max_outer_iters: usize,
    /// Relative permeability in the dry region.
    pub kr_min: f64,
    /// Width of the suction ramp from 1 down to `kr_min`, m.
    pub p_transition: f64,
    /// Relative residual target of the linear solver.
    pub linear_tol: f64,
    pub linear_max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            relax: 0.5,
            tol_head: 1e-4,
            max_outer_iters: 200,
            kr_min: 1e-4,
            p_transition: 0.5,
            linear_tol: 1e-10,
            linear_max_iters: 20_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), FemError> {
        let bad = |m: String| Err(FemError::Settings(m));
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return bad(format!("relax must lie in (0, 1], got {}", self.relax));
        }
        if !(self.tol_head > 0.0) {
            return bad(format!("tol_head must be > 0, got {}", self.tol_head));
        }
        if self.max_outer_iters < 1 {
            return bad("max_outer_iters must be at least 1".into());
        }
        if !(self.kr_min > 0.0 && self.kr_min < 1.0) {
            return bad(format!("kr_min must lie in (0, 1), got {}", self.kr_min));
        }
        if !(self.p_transition > 0.0) {
            return bad(format!("p_transition must be > 0, got {}", self.p_transition));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return bad(format!("linear_tol must lie in (0, 1), got {}", self.linear_tol));
        }
        if self.linear_max_iters < 1 {
            return bad("linear_max_iters must be at least 1".into());
        }
        Ok(())
    }

    /// Ramp from 1 at `p >= 0` down to `kr_min` at `p = -p_transition`.
    pub fn relative_permeability(&self, p: f64) -> f64 {
        if p >= 0.0 {
            1.0
        } else if p <= -self.p_transition {
            self.kr_min
        } else {
            self.kr_min + (1.0 - self.kr_min) * (1.0 + p / self.p_transition)
        }
    }
}

/// Hydraulic condition at a mesh node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum NodeBc {
    Free,
    Fixed(f64),
    SeepageFace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadField {
    /// Total head per node, m a.s.l.
    pub head: Vec<f64>,
    /// `head - y` per node, m.
    pub pressure_head: Vec<f64>,
    /// Relative permeability per element.
    pub saturation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeepageSolution {
    pub mesh: Arc<Mesh>,
    pub head_field: HeadField,
    /// Saturated conductivity per element, m/s.
    pub k_sat: Vec<f64>,
    pub node_bc: Vec<NodeBc>,
    /// Reaction per node, m³/s per m, positive into the domain; zero away
    /// from prescribed-head nodes.
    pub boundary_flux: Vec<f64>,
    pub seepage_face_active: Vec<(usize, bool)>,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Largest head change of the last outer iteration, m.
    pub last_change: f64,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassBalance {
    pub inflow: f64,
    /// Non-positive.
    pub outflow: f64,
}

impl MassBalance {
    pub fn relative_error(&self) -> f64 {
        if self.inflow == 0.0 {
            return if self.outflow == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (self.inflow + self.outflow).abs() / self.inflow
    }
}

impl SeepageSolution {
    pub fn head(&self) -> &[f64] {
        &self.head_field.head
    }

    /// Nodes where head was prescribed in the final solve.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut active = vec![false; self.node_bc.len()];
        for &(n, a) in &self.seepage_face_active {
            active[n] = a;
        }
        (0..self.node_bc.len())
            .filter(|&n| match self.node_bc[n] {
                NodeBc::Fixed(_) => true,
                NodeBc::SeepageFace => active[n],
                NodeBc::Free => false,
            })
            .collect()
    }

    pub fn element_conductivity(&self, e: usize) -> f64 {
        self.k_sat[e] * self.head_field.saturation[e]
    }

    pub fn mass_balance(&self) -> MassBalance {
        let mut inflow = 0.0;
        let mut outflow = 0.0;
        for n in self.dirichlet_nodes() {
            let r = self.boundary_flux[n];
            if r > 0.0 {
                inflow += r;
            } else {
                outflow += r;
            }
        }
        MassBalance { inflow, outflow }
    }
}

/// Reaction fluxes at prescribed-head nodes, positive into the domain.
pub fn dirichlet_reaction_flux(solution: &SeepageSolution) -> Result<Vec<(usize, f64)>, FemError> {
    if !solution.converged {
        return Err(FemError::Unconverged(
            solution
                .diagnostic
                .clone()
                .unwrap_or_else(|| "outer iteration limit reached".into()),
        ));
    }
    Ok(solution
        .dirichlet_nodes()
        .into_iter()
        .map(|n| (n, solution.boundary_flux[n]))
        .collect())
}

/// Per-node conditions from the mesh boundary edges. Fixed heads take
/// precedence over seepage faces where segments meet.
pub fn node_conditions(mesh: &Mesh, bcs: &[BoundarySegment]) -> Result<Vec<NodeBc>, FemError> {
    let mut out = vec![NodeBc::Free; mesh.nodes.len()];
    for be in &mesh.boundary_edges {
        let seg = bcs.get(be.segment).ok_or_else(|| {
            FemError::Config(format!("boundary edge refers to missing segment {}", be.segment))
        })?;
        for &n in &be.nodes {
            out[n] = match (out[n], seg.condition) {
                (NodeBc::Fixed(a), BoundaryCondition::FixedHead { head }) if a != head => {
                    return Err(FemError::Config(format!(
                        "node {n} receives fixed heads {a} and {head}"
                    )))
                }
                (NodeBc::Fixed(a), _) => NodeBc::Fixed(a),
                (_, BoundaryCondition::FixedHead { head }) => NodeBc::Fixed(head),
                (_, BoundaryCondition::SeepageFace) => NodeBc::SeepageFace,
                (cur, BoundaryCondition::Impermeable) => cur,
            };
        }
    }
    Ok(out)
}

/// Per-element saturated conductivity from per-zone values.
pub fn element_k(mesh: &Mesh, zone_k: &[f64]) -> Result<Vec<f64>, FemError> {
    mesh.elements
        .iter()
        .map(|e| {
            zone_k.get(e.zone).copied().ok_or_else(|| {
                FemError::Config(format!("zone {} has no material conductivity", e.zone))
            })
        })
        .collect()
}

pub fn pattern(mesh: &Mesh) -> CsrMatrix {
    CsrMatrix::from_elements(mesh.nodes.len(), mesh.elements.iter().map(|e| e.nodes))
}

/// Scatters element matrices with conductivities `k_elem` into `k`.
pub fn assemble_into(k: &mut CsrMatrix, mesh: &Mesh, k_elem: &[f64]) -> Result<(), FemError> {
    k.clear();
    for (e, el) in mesh.elements.iter().enumerate() {
        let m = element_conductance(mesh.element_points(e), k_elem[e], 1.0)?;
        for i in 0..3 {
            for j in 0..3 {
                k.add(el.nodes[i], el.nodes[j], m[i][j]);
            }
        }
    }
    Ok(())
}

pub fn assemble(mesh: &Mesh, k_elem: &[f64]) -> Result<CsrMatrix, FemError> {
    let mut k = pattern(mesh);
    assemble_into(&mut k, mesh, k_elem)?;
    Ok(k)
}

/// Free-node system after eliminating prescribed values.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global index of each unknown.
    pub free: Vec<usize>,
}

pub fn reduce(k: &CsrMatrix, prescribed: &[Option<f64>]) -> ReducedSystem {
    let free: Vec<usize> = (0..k.n).filter(|&i| prescribed[i].is_none()).collect();
    let rhs = free
        .iter()
        .map(|&i| {
            -k.row(i)
                .filter_map(|(j, v)| prescribed[j].map(|h| v * h))
                .sum::<f64>()
        })
        .collect();
    ReducedSystem {
        matrix: k.submatrix(&free),
        rhs,
        free,
    }
}

/// Solves `K h = 0` with prescribed values, warm-starting from `h`.
/// Values are shifted by `h_ref` to keep the unknowns small.
fn solve_prescribed(
    k: &CsrMatrix,
    prescribed: &[Option<f64>],
    h: &mut [f64],
    h_ref: f64,
    settings: &SolverSettings,
) -> Result<(), FemError> {
    let shifted: Vec<Option<f64>> = prescribed.iter().map(|p| p.map(|v| v - h_ref)).collect();
    let sys = reduce(k, &shifted);
    let mut x: Vec<f64> = sys.free.iter().map(|&i| h[i] - h_ref).collect();
    solve_spd(&sys.matrix, &sys.rhs, &mut x, settings.linear_tol, settings.linear_max_iters)?;
    for (i, v) in prescribed.iter().enumerate() {
        if let Some(v) = v {
            h[i] = *v;
        }
    }
    for (&i, xi) in sys.free.iter().zip(x) {
        h[i] = xi + h_ref;
    }
    Ok(())
}

/// Linear solve with prescribed heads and conductivities fixed per element.
pub fn solve_confined(
    mesh: &Mesh,
    k_elem: &[f64],
    prescribed: &[Option<f64>],
    settings: &SolverSettings,
) -> Result<Vec<f64>, FemError> {
    let k = assemble(mesh, k_elem)?;
    let h_ref = prescribed
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let h_ref = if h_ref.is_finite() { h_ref } else { 0.0 };
    let mut h = vec![h_ref; mesh.nodes.len()];
    solve_prescribed(&k, prescribed, &mut h, h_ref, settings)?;
    Ok(h)
}

/// Unconfined solve of a section meshed by [`crate::mesh::triangulate`].
pub fn solve_section(
    mesh: &Mesh,
    section: &DamSection,
    settings: &SolverSettings,
) -> Result<SeepageSolution, FemError> {
    let zone_k = section
        .zone_conductivities()
        .map_err(|e| FemError::Config(e.to_string()))?;
    solve_unconfined(mesh, &zone_k, &section.boundaries, settings)
}

pub fn solve_unconfined(
    mesh: &Mesh,
    zone_k: &[f64],
    bcs: &[BoundarySegment],
    settings: &SolverSettings,
) -> Result<SeepageSolution, FemError> {
    settings.validate()?;
    let n = mesh.nodes.len();
    let ne = mesh.elements.len();
    let k_sat = element_k(mesh, zone_k)?;
    let node_bc = node_conditions(mesh, bcs)?;
    let fixed: Vec<f64> = node_bc
        .iter()
        .filter_map(|b| match b {
            NodeBc::Fixed(h) => Some(*h),
            _ => None,
        })
        .collect();
    if fixed.is_empty() {
        return Err(FemError::NoFixedHead);
    }
    let h_ref = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| node_bc[i] == NodeBc::SeepageFace)
        .collect();
    let mut active = vec![true; candidates.len()];

    let mut k = pattern(mesh);
    let mut kr = vec![1.0; ne];
    let mut h = vec![h_ref; n];
    let mut h_solve = h.clone();
    let mut k_elem = vec![0.0; ne];
    let mut reaction = vec![0.0; n];
    let mut stable = 0usize;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut kr_used = kr.clone();
    let mut set_changes = 0usize;
    let mut prescribed_last = vec![false; n];
    let mut anderson = Anderson::new(5);

    for it in 1..=settings.max_outer_iters {
        iterations = it;
        let mut prescribed: Vec<Option<f64>> = node_bc
            .iter()
            .map(|b| match b {
                NodeBc::Fixed(v) => Some(*v),
                _ => None,
            })
            .collect();
        for (c, &node) in candidates.iter().enumerate() {
            if active[c] {
                prescribed[node] = Some(mesh.nodes[node].y);
            }
        }
        for e in 0..ne {
            k_elem[e] = k_sat[e] * kr[e];
        }
        assemble_into(&mut k, mesh, &k_elem)?;
        h_solve.copy_from_slice(&h);
        solve_prescribed(&k, &prescribed, &mut h_solve, h_ref, settings)?;
        kr_used.copy_from_slice(&kr);
        for (flag, p) in prescribed_last.iter_mut().zip(&prescribed) {
            *flag = p.is_some();
        }

        let shifted: Vec<f64> = h_solve.iter().map(|v| v - h_ref).collect();
        k.matvec_into(&shifted, &mut reaction);
        let scale: f64 = (0..n)
            .filter(|&i| prescribed[i].is_some())
            .map(|i| reaction[i].abs())
            .sum();
        let flux_tol = 1e-10 * scale;

        let mut changed = false;
        for (c, &node) in candidates.iter().enumerate() {
            let y = mesh.nodes[node].y;
            if active[c] && reaction[node] > flux_tol {
                active[c] = false;
                changed = true;
            } else if !active[c] && h_solve[node] > y + settings.tol_head {
                active[c] = true;
                changed = true;
            }
        }
        if changed {
            set_changes += 1;
        }

        change = if it == 1 {
            f64::INFINITY
        } else {
            // heads deep in the residual-flow zone carry no flow and are
            // excluded from the change measure
            let floor = -settings.p_transition;
            (0..n)
                .filter(|&i| {
                    let y = mesh.nodes[i].y;
                    h_solve[i] - y >= floor || h[i] - y >= floor
                })
                .map(|i| (h_solve[i] - h[i]).abs())
                .fold(0.0, f64::max)
        };
        if it == 1 || changed {
            anderson.reset();
            h.copy_from_slice(&h_solve);
        } else {
            anderson.step(&mut h, &h_solve, settings.relax);
        }
        for (e, el) in mesh.elements.iter().enumerate() {
            let c = mesh.element_centroid(e);
            let hc = (h[el.nodes[0]] + h[el.nodes[1]] + h[el.nodes[2]]) / 3.0;
            kr[e] = settings.relative_permeability(hc - c.y);
        }
        stable = if changed { 0 } else { stable + 1 };
        log::trace!("outer {it}: change {change:.3e}, set stable {stable}");
        if change < settings.tol_head && stable >= 2 {
            converged = true;
            break;
        }
    }

    let diagnostic = if converged {
        None
    } else if stable < 2 {
        Some(format!(
            "seepage-face active set still switching after {iterations} iterations ({set_changes} switches)"
        ))
    } else {
        Some(format!(
            "head change {change:.3e} m above tolerance after {iterations} iterations"
        ))
    };
    if let Some(d) = &diagnostic {
        log::warn!("unconfined solve not converged: {d}");
    }

    // final state belongs to the last solve: its BCs and its conductivities
    let boundary_flux: Vec<f64> = (0..n)
        .map(|i| if prescribed_last[i] { reaction[i] } else { 0.0 })
        .collect();
    let seepage_face_active = candidates
        .iter()
        .map(|&c| (c, prescribed_last[c]))
        .collect();
    let pressure_head = h_solve
        .iter()
        .zip(&mesh.nodes)
        .map(|(h, p)| h - p.y)
        .collect();
    Ok(SeepageSolution {
        mesh: Arc::new(mesh.clone()),
        head_field: HeadField {
            head: h_solve,
            pressure_head,
            saturation: kr_used,
        },
        k_sat,
        node_bc,
        boundary_flux,
        seepage_face_active,
        converged,
        outer_iterations: iterations,
        last_change: change,
        diagnostic,
    })
}

/// Anderson mixing of the Picard map `h -> G(h)`.
struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    dh: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            last: None,
            dh: Vec::new(),
            df: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.last = None;
        self.dh.clear();
        self.df.clear();
    }

    /// Replaces `h` by the mixed update given `g = G(h)`.
    fn step(&mut self, h: &mut [f64], g: &[f64], beta: f64) {
        let f: Vec<f64> = g.iter().zip(h.iter()).map(|(a, b)| a - b).collect();
        if let Some((h_prev, f_prev)) = self.last.take() {
            self.dh.push(h.iter().zip(&h_prev).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&f_prev).map(|(a, b)| a - b).collect());
            if self.dh.len() > self.depth {
                self.dh.remove(0);
                self.df.remove(0);
            }
        }
        self.last = Some((h.to_vec(), f.clone()));
        let m = self.df.len();
        let gamma = if m == 0 {
            Vec::new()
        } else {
            let mut a = vec![vec![0.0; m]; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                for j in 0..=i {
                    let v = dot(&self.df[i], &self.df[j]);
                    a[i][j] = v;
                    a[j][i] = v;
                }
                rhs[i] = dot(&self.df[i], &f);
            }
            let trace: f64 = (0..m).map(|i| a[i][i]).sum();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += 1e-10 * trace;
            }
            solve_small(a, rhs).unwrap_or_else(|| vec![0.0; m])
        };
        for i in 0..h.len() {
            let mut v = h[i] + beta * f[i];
            for (k, gk) in gamma.iter().enumerate() {
                v -= gk * (self.dh[k][i] + beta * self.df[k][i]);
            }
            h[i] = v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c] == 0.0 || !a[p][c].is_finite() {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests;
