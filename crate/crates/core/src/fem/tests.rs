use super::*;
use crate::geometry::benchmark::rectangular_dam;
use crate::geometry::Point;
use crate::mesh::{triangulate, Element};

fn square_mesh() -> Mesh {
    Mesh {
        nodes: vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ],
        elements: vec![
            Element {
                nodes: [0, 1, 2],
                zone: 0,
            },
            Element {
                nodes: [0, 2, 3],
                zone: 0,
            },
        ],
        boundary_edges: Vec::new(),
        target_size: 1.0,
        zone_names: vec!["a".into()],
    }
}

#[test]
fn two_element_square_matches_hand_sum() {
    let k = assemble(&square_mesh(), &[1.0, 1.0]).unwrap();
    let want = [
        [1.0, -0.5, 0.0, -0.5],
        [-0.5, 1.0, -0.5, 0.0],
        [0.0, -0.5, 1.0, -0.5],
        [-0.5, 0.0, -0.5, 1.0],
    ];
    let d = k.to_dense();
    for i in 0..4 {
        for j in 0..4 {
            assert!((d[i][j] - want[i][j]).abs() < 1e-15, "({i},{j})");
        }
    }
}

#[test]
fn all_dirichlet_is_direct() {
    let m = square_mesh();
    let k = assemble(&m, &[1.0, 1.0]).unwrap();
    let pres = vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)];
    let sys = reduce(&k, &pres);
    assert_eq!(sys.matrix.n, 0);
    assert!(sys.rhs.is_empty());
    let h = solve_confined(&m, &[1.0, 1.0], &pres, &SolverSettings::default()).unwrap();
    assert_eq!(h, vec![1.0, 2.0, 3.0, 4.0]);
}

fn column_mesh(n: usize) -> Mesh {
    // strip [0,1] x [0,n], two triangles per unit cell
    let mut nodes = Vec::new();
    for j in 0..=n {
        nodes.push(Point::new(0.0, j as f64));
        nodes.push(Point::new(1.0, j as f64));
    }
    let mut elements = Vec::new();
    for j in 0..n {
        let (a, b, c, d) = (2 * j, 2 * j + 1, 2 * j + 3, 2 * j + 2);
        elements.push(Element {
            nodes: [a, b, c],
            zone: 0,
        });
        elements.push(Element {
            nodes: [a, c, d],
            zone: 0,
        });
    }
    Mesh {
        nodes,
        elements,
        boundary_edges: Vec::new(),
        target_size: 1.0,
        zone_names: vec!["col".into()],
    }
}

#[test]
fn column_is_linear_and_darcy() {
    let m = column_mesh(10);
    let k = 3e-5;
    let pres: Vec<Option<f64>> = m
        .nodes
        .iter()
        .map(|p| match p.y {
            y if y == 10.0 => Some(10.0),
            y if y == 0.0 => Some(0.0),
            _ => None,
        })
        .collect();
    let ke = vec![k; m.elements.len()];
    let h = solve_confined(&m, &ke, &pres, &SolverSettings::default()).unwrap();
    for (p, hi) in m.nodes.iter().zip(&h) {
        assert!((hi - p.y).abs() < 1e-9);
    }
    let kmat = assemble(&m, &ke).unwrap();
    let r = kmat.matvec(&h);
    let top: f64 = (0..m.nodes.len()).filter(|&i| m.nodes[i].y == 10.0).map(|i| r[i]).sum();
    // area 1 m², dH 10 m over 10 m
    assert!((top - k * 10.0 / 10.0).abs() <= 1e-9 * k);
}

#[test]
fn patch_test_on_generated_mesh() {
    let s = rectangular_dam(7.0, 3.0, 1e-5, 3.0, 1.0).unwrap();
    let m = triangulate(&s, 0.6, &[]).unwrap();
    let f = |p: Point| 4.0 - 0.3 * p.x + 1.7 * p.y;
    let mut on_boundary = vec![false; m.nodes.len()];
    for b in &m.boundary_edges {
        on_boundary[b.nodes[0]] = true;
        on_boundary[b.nodes[1]] = true;
    }
    let pres: Vec<Option<f64>> = (0..m.nodes.len())
        .map(|i| on_boundary[i].then(|| f(m.nodes[i])))
        .collect();
    assert!(pres.iter().any(Option::is_none));
    let h = solve_confined(&m, &vec![1e-5; m.elements.len()], &pres, &SolverSettings::default()).unwrap();
    for (p, hi) in m.nodes.iter().zip(&h) {
        assert!((hi - f(*p)).abs() < 1e-9);
    }
}

#[test]
fn settings_validated() {
    let bad = SolverSettings {
        kr_min: 1.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = SolverSettings {
        relax: 0.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    assert!(SolverSettings::default().validate().is_ok());
}

#[test]
fn kr_ramp() {
    let s = SolverSettings::default();
    assert_eq!(s.relative_permeability(0.3), 1.0);
    assert_eq!(s.relative_permeability(-1.0), 1e-4);
    let mid = s.relative_permeability(-0.25);
    assert!((mid - (1e-4 + (1.0 - 1e-4) * 0.5)).abs() < 1e-15);
}

fn dupuit(target: f64, settings: &SolverSettings) -> (SeepageSolution, f64) {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 2.0).unwrap();
    let m = triangulate(&s, target, &[]).unwrap();
    let sol = solve_section(&m, &s, settings).unwrap();
    let q: f64 = sol
        .dirichlet_nodes()
        .into_iter()
        .filter(|&n| sol.node_bc[n] == NodeBc::Fixed(10.0))
        .map(|n| sol.boundary_flux[n])
        .sum();
    (sol, q)
}

#[test]
fn dupuit_discharge_and_balance() {
    let (sol, q) = dupuit(0.5, &SolverSettings::default());
    assert!(sol.converged, "{:?}", sol.diagnostic);
    let exact = 1e-4 * (100.0 - 4.0) / 40.0;
    assert!((q - exact).abs() <= 0.1 * exact, "q = {q}");
    let mb = sol.mass_balance();
    assert!(mb.relative_error() <= 1e-2, "{mb:?}");
    // discrete maximum principle
    let h = sol.head();
    let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo >= 2.0 - 1e-6 && hi <= 10.0 + 1e-6, "{lo} {hi}");
}

#[test]
fn refinement_changes_discharge_little() {
    let settings = SolverSettings::default();
    let (a, qa) = dupuit(0.5, &settings);
    let (b, qb) = dupuit(0.25, &settings);
    assert!(a.converged && b.converged);
    assert!((qa - qb).abs() < 0.05 * qb, "{qa} {qb}");
}

#[test]
fn seepage_face_complementarity() {
    let settings = SolverSettings::default();
    let (sol, _) = dupuit(0.5, &settings);
    let m = &sol.mesh;
    assert!(sol.seepage_face_active.iter().any(|&(_, a)| a));
    for &(n, active) in &sol.seepage_face_active {
        let y = m.nodes[n].y;
        let h = sol.head()[n];
        if active {
            assert!((h - y).abs() <= settings.tol_head);
            assert!(sol.boundary_flux[n] <= 1e-10 * 1e-4);
        } else {
            assert!(h <= y + settings.tol_head);
            assert_eq!(sol.boundary_flux[n], 0.0);
        }
    }
}

#[test]
fn uniform_k_scaling() {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 2.0).unwrap();
    let m = triangulate(&s, 1.0, &[]).unwrap();
    let settings = SolverSettings::default();
    let a = solve_unconfined(&m, &[1e-4], &s.boundaries, &settings).unwrap();
    let b = solve_unconfined(&m, &[1e-3], &s.boundaries, &settings).unwrap();
    assert_eq!(a.outer_iterations, b.outer_iterations);
    for (x, y) in a.head().iter().zip(b.head()) {
        assert!((x - y).abs() < 1e-7);
    }
    for (x, y) in a.boundary_flux.iter().zip(&b.boundary_flux) {
        assert!((10.0 * x - y).abs() <= 1e-6 * 1e-3);
    }
}

#[test]
fn relaxation_factors_agree() {
    let tight = |relax| SolverSettings {
        relax,
        tol_head: 1e-6,
        max_outer_iters: 1000,
        linear_tol: 1e-13,
        ..Default::default()
    };
    let (base, _) = dupuit(1.0, &tight(0.5));
    assert!(base.converged, "{:?}", base.diagnostic);
    for relax in [0.3, 0.8] {
        let (other, _) = dupuit(1.0, &tight(relax));
        assert!(other.converged, "relax {relax}: {:?}", other.diagnostic);
        // dry-zone heads below the ramp are left out, as in the stopping rule
        let m = &base.mesh;
        for (i, (x, y)) in base.head().iter().zip(other.head()).enumerate() {
            if x - m.nodes[i].y < -0.5 && y - m.nodes[i].y < -0.5 {
                continue;
            }
            assert!((x - y).abs() <= 1e-4, "relax {relax}: {x} vs {y}");
        }
    }
}

#[test]
fn submerged_is_confined() {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 10.0).unwrap();
    let m = triangulate(&s, 1.0, &[]).unwrap();
    let sol = solve_section(&m, &s, &SolverSettings::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.head_field.saturation.iter().all(|&k| k == 1.0));
    for &r in &sol.boundary_flux {
        assert!(r.abs() <= 1e-12);
    }
}

#[test]
fn unconverged_flux_refused() {
    let settings = SolverSettings {
        max_outer_iters: 1,
        ..Default::default()
    };
    let (sol, _) = dupuit(1.0, &settings);
    assert!(!sol.converged);
    assert!(sol.diagnostic.is_some());
    assert!(matches!(
        dirichlet_reaction_flux(&sol),
        Err(FemError::Unconverged(_))
    ));
}

#[test]
fn missing_zone_material() {
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 2.0).unwrap();
    let m = triangulate(&s, 2.0, &[]).unwrap();
    assert!(matches!(
        solve_unconfined(&m, &[], &s.boundaries, &SolverSettings::default()),
        Err(FemError::Config(_))
    ));
}
