use std::sync::{Arc, OnceLock};

use super::svg::{render_svg, SvgOptions};
use super::vtk::{read_vtk, write_vtk};
use super::*;
use crate::fem::{solve_section, HeadField, SolverSettings};
use crate::geometry::benchmark::rectangular_dam;
use crate::mesh::triangulate;

fn with_heads(mesh: Mesh, head: Vec<f64>) -> SeepageSolution {
    let pressure_head = head.iter().zip(&mesh.nodes).map(|(h, p)| h - p.y).collect();
    let ne = mesh.elements.len();
    let n = mesh.nodes.len();
    SeepageSolution {
        mesh: Arc::new(mesh),
        head_field: HeadField {
            head,
            pressure_head,
            saturation: vec![1.0; ne],
        },
        k_sat: vec![1e-5; ne],
        node_bc: vec![NodeBc::Free; n],
        boundary_flux: vec![0.0; n],
        seepage_face_active: Vec::new(),
        converged: true,
        outer_iterations: 1,
        last_change: 0.0,
        diagnostic: None,
    }
}

fn linear_solution() -> SeepageSolution {
    let s = rectangular_dam(7.0, 3.0, 1e-5, 3.0, 1.0).unwrap();
    let m = triangulate(&s, 0.6, &[]).unwrap();
    let h = m.nodes.iter().map(|p| 2.0 * p.x + 3.0 * p.y).collect();
    with_heads(m, h)
}

fn dupuit() -> &'static (DamSection, SeepageSolution) {
    static CELL: OnceLock<(DamSection, SeepageSolution)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 2.0).unwrap();
        let m = triangulate(&s, 0.5, &[]).unwrap();
        let sol = solve_section(&m, &s, &SolverSettings::default()).unwrap();
        assert!(sol.converged);
        (s, sol)
    })
}

#[test]
fn probe_exact_at_nodes() {
    let sol = linear_solution();
    for (i, p) in sol.mesh.nodes.iter().enumerate().step_by(7) {
        assert_eq!(probe_head(&sol, *p).unwrap(), sol.head()[i]);
    }
}

#[test]
fn probe_reproduces_linear_field() {
    let sol = linear_solution();
    for (x, y) in [(0.1, 0.1), (3.33, 1.7), (6.9, 2.95), (5.0, 0.0)] {
        let h = probe_head(&sol, Point::new(x, y)).unwrap();
        assert!((h - (2.0 * x + 3.0 * y)).abs() < 1e-9);
    }
}

#[test]
fn probe_continuous_across_edges() {
    let (_, sol) = dupuit();
    let mesh = &sol.mesh;
    let h = sol.head();
    let interp = |e: usize, p: Point| {
        let l = barycentric(mesh, e, p);
        let [a, b, c] = mesh.elements[e].nodes;
        l[0] * h[a] + l[1] * h[b] + l[2] * h[c]
    };
    let ne = mesh.node_elements();
    let mut checked = 0;
    for (e, el) in mesh.elements.iter().enumerate().step_by(37) {
        let (a, b) = (el.nodes[0], el.nodes[1]);
        let Some(&f) = ne[a].iter().find(|&&f| f != e && mesh.elements[f].nodes.contains(&b)) else {
            continue;
        };
        let mid = mesh.nodes[a].lerp(mesh.nodes[b], 0.3);
        assert!((interp(e, mid) - interp(f, mid)).abs() <= 1e-12 * h[a].abs().max(1.0));
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn probe_outside_rejected() {
    let sol = linear_solution();
    assert!(matches!(
        probe_head(&sol, Point::new(7.5, 1.0)),
        Err(PostprocError::OutsideDomain { .. })
    ));
}

#[test]
fn discharge_unit_identities() {
    assert_eq!(DischargeReport::new("a", 9.7e-6, 450.0).q_total_lps, 4.365);
    assert_eq!(DischargeReport::new("b", 5.5e-6, 450.0).q_total_lps, 2.475);
}

#[test]
fn no_head_difference_no_discharge() {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 6.0, 6.0).unwrap();
    let m = triangulate(&s, 1.0, &[]).unwrap();
    let sol = solve_section(&m, &s, &SolverSettings::default()).unwrap();
    let r = total_discharge(&sol, &s, "still").unwrap();
    assert!(r.q_total_lps.abs() <= 1e-12);
}

#[test]
fn unconverged_discharge_refused() {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 2.0).unwrap();
    let m = triangulate(&s, 1.0, &[]).unwrap();
    let settings = SolverSettings {
        max_outer_iters: 1,
        ..Default::default()
    };
    let sol = solve_section(&m, &s, &settings).unwrap();
    assert!(matches!(
        total_discharge(&sol, &s, "x"),
        Err(PostprocError::Unconverged(_))
    ));
}

#[test]
fn submerged_line_is_confined() {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 10.0).unwrap();
    let m = triangulate(&s, 1.0, &[]).unwrap();
    let sol = solve_section(&m, &s, &SolverSettings::default()).unwrap();
    let line = phreatic_line(&sol);
    assert!(line.confined && line.points.is_empty());
}

#[test]
fn dupuit_phreatic_line() {
    let (_, sol) = dupuit();
    let line = phreatic_line(sol);
    assert!(!line.confined);
    let first = line.points[0];
    assert!(first.dist(Point::new(0.0, 10.0)) <= 0.5, "{first:?}");
    let mid = line.elevation_at(10.0).unwrap();
    let dupuit = 52f64.sqrt();
    assert!((mid - dupuit).abs() <= 0.1 * dupuit, "mid {mid}");
    for w in line.points.windows(2) {
        assert!(w[1].x > w[0].x);
    }
    for p in &line.points {
        let pressure = probe_head(sol, *p).unwrap() - p.y;
        assert!(pressure.abs() <= 1e-4, "{p:?} {pressure}");
    }
    let exit = line.exit_point().unwrap();
    assert!(exit.y >= 2.0 - 1e-4 && exit.y <= 10.0 + 1e-4);
    for w in line.points.windows(2) {
        assert!(w[1].y <= w[0].y + 1e-4, "line rises at {:?}", w[1]);
    }
}

#[test]
fn linear_gradient() {
    let sol = linear_solution();
    let g = gradient_field(&sol);
    for v in &g.gradient {
        assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] - 3.0).abs() < 1e-12);
    }
    for v in &g.velocity {
        assert!((v[0] + 2e-5).abs() < 1e-16);
    }
}

#[test]
fn unit_gradient_column() {
    let s = rectangular_dam(1.0, 10.0, 1e-5, 10.0, 0.0).unwrap();
    let m = triangulate(&s, 0.5, &[]).unwrap();
    let h = m.nodes.iter().map(|p| p.y).collect();
    let g = gradient_field(&with_heads(m, h));
    assert!(g.magnitude.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn cut_line_agrees_with_reactions() {
    let (s, sol) = dupuit();
    let q = total_discharge(sol, s, "dupuit").unwrap().q_per_meter;
    let field = gradient_field(sol);
    for x in [3.0, 10.0, 16.0] {
        let c = cut_line_discharge(sol, &field, x);
        assert!((c - q).abs() <= 0.05 * q, "x {x}: {c} vs {q}");
    }
}

#[test]
fn exit_gradient_on_downstream_face() {
    let (_, sol) = dupuit();
    let field = gradient_field(sol);
    let exit = exit_gradient(sol, &field).unwrap();
    let touches = sol.mesh.elements[exit.element]
        .nodes
        .iter()
        .any(|&n| sol.mesh.nodes[n].x == 20.0);
    assert!(touches && exit.value > 0.0);
}

#[test]
fn vtk_round_trip() {
    let (_, sol) = dupuit();
    let mut buf = Vec::new();
    write_vtk(sol, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(text.contains(&format!("POINTS {} double", sol.mesh.nodes.len())));
    let back = read_vtk(&buf[..]).unwrap();
    assert_eq!(back.points, sol.mesh.nodes);
    assert_eq!(back.point_scalars["head"], sol.head());
    assert_eq!(back.cells.len(), sol.mesh.elements.len());
    assert_eq!(back.cell_scalars["k_r"], sol.head_field.saturation);
    let v = &back.cell_vectors["velocity"];
    let g = gradient_field(sol);
    assert!(v.iter().zip(&g.velocity).all(|(a, b)| a[0] == b[0] && a[1] == b[1]));
}

#[test]
fn svg_layers() {
    let (s, sol) = dupuit();
    let full = render_svg(sol, s, &SvgOptions::default());
    assert_eq!(full.matches("class=\"equipotential\"").count(), 15);
    assert!(full.contains("id=\"phreatic\"") && full.contains("class=\"glyph\""));
    let bare = render_svg(
        sol,
        s,
        &SvgOptions {
            equipotentials: 0,
            glyphs: 0,
            ..Default::default()
        },
    );
    assert!(bare.contains("class=\"zone\"") && bare.contains("id=\"phreatic\""));
    assert!(!bare.contains("equipotential") && !bare.contains("glyph"));
}
