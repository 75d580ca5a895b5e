//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

use std::io::Write;
use std::time::Instant;

use damseep::calibration::{calibrate, CalibrationProblem, FreeParameter};
use damseep::fem::{assemble, solve_confined, solve_section, SolverSettings};
use damseep::geometry::benchmark::rectangular_dam;
use damseep::geometry::{apply_scenario, Point};
use damseep::material::names;
use damseep::mesh::{triangulate, Element, Mesh};
use damseep::postproc::{phreatic_line, total_discharge, DischargeReport, PiezometerRecord};
use damseep::study::{
    parse_config, read_instrument_csv, run_sweep, validate_against_instruments, write_outputs, RunConfig, SweepResult,
};

const BASELINE: &str = include_str!("../../../configs/sahand_baseline.json");
const SWEEP: &str = include_str!("../../../configs/sahand_sweep.json");
const READINGS: &str = include_str!("../../../data/sahand_2007-05-07.csv");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Written straight to stderr so the lines show without `--nocapture`.
fn report(n: usize, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {status} {}", o.detail);
}

fn boundary_flags(m: &Mesh) -> Vec<bool> {
    let mut b = vec![false; m.nodes.len()];
    for e in &m.boundary_edges {
        b[e.nodes[0]] = true;
        b[e.nodes[1]] = true;
    }
    b
}

fn patch_test() -> Outcome {
    let t = Instant::now();
    let settings = SolverSettings {
        linear_tol: 1e-14,
        ..Default::default()
    };
    let config = parse_config(BASELINE).unwrap();
    let sahand = config.base_section().unwrap();
    let meshes = [
        triangulate(&rectangular_dam(7.0, 3.0, 1e-5, 3.0, 1.0).unwrap(), 0.4, &[]).unwrap(),
        triangulate(&sahand, 12.0, &[]).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for m in &meshes {
        let c = m.nodes[0];
        let f = |p: Point| 4.0 - 0.3 * (p.x - c.x) + 1.7 * (p.y - c.y);
        let on_boundary = boundary_flags(m);
        let pres: Vec<Option<f64>> = (0..m.nodes.len())
            .map(|i| on_boundary[i].then(|| f(m.nodes[i])))
            .collect();
        let h = solve_confined(m, &vec![2e-6; m.elements.len()], &pres, &settings).unwrap();
        for (p, hi) in m.nodes.iter().zip(&h) {
            worst = worst.max((hi - f(*p)).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 1.0,
        format!("patch test max error {worst:.2e} m on 2 meshes in {secs:.2} s"),
    )
}

fn element_oracle() -> Outcome {
    // 3 x 3 distorted grid, 8 triangles with distinct conductivities
    let mut nodes = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            let (x, y) = (i as f64, j as f64);
            nodes.push(Point::new(x + 0.13 * (x * y).sin(), y + 0.07 * (x + 2.0 * y).cos()));
        }
    }
    let mut elements = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            let a = 3 * j + i;
            elements.push(Element {
                nodes: [a, a + 1, a + 4],
                zone: 0,
            });
            elements.push(Element {
                nodes: [a, a + 4, a + 3],
                zone: 0,
            });
        }
    }
    let mesh = Mesh {
        nodes,
        elements,
        boundary_edges: Vec::new(),
        target_size: 1.0,
        zone_names: vec!["all".into()],
    };
    let k: Vec<f64> = (0..8).map(|e| 1.0 + 0.5 * e as f64).collect();
    let mut dense = vec![vec![0.0; 9]; 9];
    for (e, el) in mesh.elements.iter().enumerate() {
        let p = el.nodes.map(|n| mesh.nodes[n]);
        let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
        let b = [p[1].y - p[2].y, p[2].y - p[0].y, p[0].y - p[1].y];
        let c = [p[2].x - p[1].x, p[0].x - p[2].x, p[1].x - p[0].x];
        for i in 0..3 {
            for j in 0..3 {
                dense[el.nodes[i]][el.nodes[j]] += k[e] * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
            }
        }
    }
    let got = assemble(&mesh, &k).unwrap().to_dense();
    let mut worst: f64 = 0.0;
    for i in 0..9 {
        for j in 0..9 {
            worst = worst.max((got[i][j] - dense[i][j]).abs());
        }
    }
    outcome(worst <= 1e-12, format!("8-element assembly max deviation {worst:.2e}"))
}

fn dupuit() -> Outcome {
    let t = Instant::now();
    let s = rectangular_dam(20.0, 10.0, 1e-4, 10.0, 2.0).unwrap();
    let mut q = Vec::new();
    let mut mid = 0.0;
    for size in [1.0, 0.5, 0.25] {
        let m = triangulate(&s, size, &[]).unwrap();
        let sol = solve_section(&m, &s, &SolverSettings::default()).unwrap();
        if !sol.converged {
            return outcome(false, format!("Dupuit solve at size {size} did not converge"));
        }
        q.push(total_discharge(&sol, &s, "dupuit").unwrap().q_per_meter);
        mid = phreatic_line(&sol).elevation_at(10.0).unwrap_or(f64::NAN);
    }
    let secs = t.elapsed().as_secs_f64();
    let finest = q[2];
    let change = (q[2] - q[1]).abs() / q[1];
    let ok = (finest - 2.4e-4).abs() <= 0.1 * 2.4e-4 && (mid - 7.21).abs() <= 0.1 * 7.21 && change < 0.05 && secs < 30.0;
    outcome(
        ok,
        format!(
            "Dupuit q {finest:.4e} m3/s/m, mid-length phreatic {mid:.3} m, last refinement change {:.3}%, {secs:.1} s",
            100.0 * change
        ),
    )
}

fn mass_balance(sweep: &SweepResult) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for o in &sweep.outcomes {
        if let Some(s) = o.summary() {
            worst = worst.max(s.mass_balance_error);
            n += 1;
        }
    }
    outcome(
        n > 0 && worst <= 0.01,
        format!("{n} converged scenarios, worst relative imbalance {worst:.2e}"),
    )
}

fn unit_identities() -> Outcome {
    let a = DischargeReport::new("normal", 9.7e-6, 450.0).q_total_lps;
    let b = DischargeReport::new("validation", 5.5e-6, 450.0).q_total_lps;
    outcome(a == 4.365 && b == 2.475, format!("{a} L/s and {b} L/s"))
}

fn trends(sweep: &SweepResult, secs: f64) -> Outcome {
    let q = |n: &str| sweep.get(n).and_then(|o| o.summary()).map(|s| s.discharge.q_per_meter);
    let names = [
        "baseline",
        "foundation_30m",
        "foundation_90m",
        "foundation_120m",
        "cutoff_under_core",
        "cutoff_upstream_heel",
        "concrete_cover",
        "clay_blanket",
        "composite",
    ];
    let vals: Option<Vec<f64>> = names.iter().map(|n| q(n)).collect();
    let Some(v) = vals else {
        return outcome(false, format!("failed scenarios: {:?}", sweep.failed()));
    };
    let [base, d30, d90, d120, under, heel, cover, blanket, composite] = v[..] else {
        unreachable!()
    };
    let factor = base / 9.7e-6;
    let a = (1.0 / 3.0..=3.0).contains(&factor);
    let b = d30 < base && base < d90 && d90 < d120;
    let c = under <= heel && heel <= base;
    let d = (cover / base - 1.0).abs() <= 0.15 && (blanket / base - 1.0).abs() <= 0.15;
    let ratio = composite / base;
    let e = ratio <= 0.5;
    let f = secs < 300.0;
    outcome(
        a && b && c && d && e && f,
        format!(
            "(a) baseline {base:.3e} m3/s/m, x{factor:.2} {}; (b) depths 30/60/90/120 {:.2}/{:.2}/{:.2}/{:.2} L/s {}; \
             (c) under core {:.2} <= heel {:.2} <= baseline {:.2} L/s {}; (d) cover {:+.1}%, blanket {:+.1}% {}; \
             (e) composite ratio {ratio:.2} {}; sweep {secs:.0} s {}",
            ok(a),
            d30 * 450e3,
            base * 450e3,
            d90 * 450e3,
            d120 * 450e3,
            ok(b),
            under * 450e3,
            heel * 450e3,
            base * 450e3,
            ok(c),
            100.0 * (cover / base - 1.0),
            100.0 * (blanket / base - 1.0),
            ok(d),
            ok(e),
            ok(f),
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn twin(config: &RunConfig) -> Outcome {
    let base = config.base_section().unwrap();
    let mut scenario = config.scenarios[0].clone();
    scenario.reservoir_level = 1582.8;
    let section = apply_scenario(&base, &scenario).unwrap();
    let size = config.calibration.target_size.unwrap_or(config.mesh.target_size);
    let mesh = std::sync::Arc::new(triangulate(&section, size, &[]).unwrap());
    let free = vec![FreeParameter {
        zone: names::STONE_FOUNDATION.into(),
        lower: -9.0,
        upper: -2.0,
    }];
    let locations: Vec<PiezometerRecord> = config.piezometers.clone();
    let truth = CalibrationProblem::with_mesh(
        section.clone(),
        mesh.clone(),
        free.clone(),
        locations.clone(),
        false,
        config.solver.clone(),
    )
    .unwrap()
    .evaluate(&[-6.0])
    .unwrap();
    let obs: Vec<PiezometerRecord> = locations
        .into_iter()
        .zip(&truth.heads)
        .map(|(p, h)| PiezometerRecord {
            observed_level: h - 1490.0,
            ..p
        })
        .collect();
    let problem = CalibrationProblem::with_mesh(section, mesh, free, obs, true, config.solver.clone()).unwrap();
    let r = calibrate(&problem, &[-4.0], 200).unwrap();
    let err = (r.log10_k[0] + 6.0).abs();
    let pass = err <= 0.3 && r.evaluations <= 200 && r.rms_residual <= 2.0 * config.solver.tol_head;
    outcome(
        pass,
        format!(
            "recovered log10 k {:.4} (true -6, start -4) in {} evaluations, rms {:.2e} m, datum {:.4} m",
            r.log10_k[0], r.evaluations, r.rms_residual, r.datum_offset
        ),
    )
}

fn anomaly(config: &RunConfig) -> Outcome {
    let instruments = read_instrument_csv(READINGS.as_bytes()).unwrap();
    let date = chrono::NaiveDate::from_ymd_opt(2007, 5, 7).unwrap();
    match validate_against_instruments(config, &instruments, date) {
        Ok(r) => outcome(
            r.leakage_anomaly && r.model_q_lps <= 6.0 && r.observed_q_lps == Some(12.7),
            format!(
                "model {:.2} L/s vs observed {:?} L/s, anomaly flag {}",
                r.model_q_lps, r.observed_q_lps, r.leakage_anomaly
            ),
        ),
        Err(e) => outcome(false, format!("validation failed: {e}")),
    }
}

fn determinism(config: &RunConfig, first: &SweepResult) -> Outcome {
    let second = run_sweep(config, Some(1), None).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outputs(first, config, SWEEP, a.path()).unwrap();
    write_outputs(&second, config, SWEEP, b.path()).unwrap();
    let same = |f: &str| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap();
    let csv = same("report.csv");
    let manifest = same("manifest.json");
    outcome(
        csv && manifest && first.report_csv() == second.report_csv(),
        format!(
            "parallel vs sequential report.csv identical: {csv}, manifest identical: {manifest}"
        ),
    )
}

#[test]
fn acceptance() {
    let sweep_config = parse_config(SWEEP).unwrap();
    let baseline_config = parse_config(BASELINE).unwrap();
    let t = Instant::now();
    let sweep = run_sweep(&sweep_config, None, None).unwrap();
    let sweep_secs = t.elapsed().as_secs_f64();

    let results = [
        patch_test(),
        element_oracle(),
        dupuit(),
        mass_balance(&sweep),
        unit_identities(),
        trends(&sweep, sweep_secs),
        twin(&baseline_config),
        anomaly(&baseline_config),
        determinism(&sweep_config, &sweep),
    ];
    for (i, r) in results.iter().enumerate() {
        report(i + 1, r);
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.pass)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
