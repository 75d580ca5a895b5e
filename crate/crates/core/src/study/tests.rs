use std::collections::BTreeSet;

use chrono::NaiveDate;

use super::*;
use crate::fem::SolverSettings;
use crate::postproc::probe_head;

const BASELINE: &str = include_str!("../../../../configs/sahand_baseline.json");
const SWEEP: &str = include_str!("../../../../configs/sahand_sweep.json");
const SCHEMA: &str = include_str!("../../../../configs/run_config.schema.json");

fn coarse() -> RunConfig {
    let mut c = parse_config(BASELINE).unwrap();
    c.mesh.target_size = 10.0;
    c
}

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 5, 7).unwrap()
}

fn minimal(extra: &str) -> String {
    format!(
        r#"{{
  "materials": [
    {{"name": "Upstream shell", "k": "1e-1 cm/s"}},
    {{"name": "Downstream shell", "k": "1e-1 cm/s"}},
    {{"name": "Core", "k": "1e-8 cm/s"}},
    {{"name": "Stone foundation", "k": "1e-4 cm/s"}},
    {{"name": "Filter", "k": "1e-2 cm/s"}},
    {{"name": "Drain adjacent to the filter", "k": "1 cm/s"}},
    {{"name": "Bottom waste material", "k": "1e-2 cm/s"}}
  ],
  "scenarios": [{{"name": "plain", "reservoir_level": 1590.0}}]{extra}
}}"#
    )
}

#[test]
fn shipped_baseline_matches_material_table() {
    let c = parse_config(BASELINE).unwrap();
    assert_eq!(c.materials.len(), 7);
    let k: Vec<f64> = c.materials.iter().map(|m| m.k_m_per_s()).collect();
    let expected = [1e-3, 1e-3, 1e-10, 1e-6, 1e-4, 1e-2, 1e-4];
    for (a, b) in k.iter().zip(expected) {
        assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
    }
    assert_eq!(c.section.crest_length, 450.0);
}

#[test]
fn shipped_sweep_has_study_matrix() {
    let c = parse_config(SWEEP).unwrap();
    let names: Vec<&str> = c.scenarios.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names.len(), 9);
    for n in ["baseline", "foundation_30m", "foundation_90m", "foundation_120m", "composite"] {
        assert!(names.contains(&n), "{n}");
    }
    assert!(c.scenarios.iter().all(|s| s.reservoir_level == 1600.3));
    assert_eq!(c.baseline_name(), "baseline");
}

#[test]
fn schema_lists_every_key() {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
    let config = serde_json::to_value(parse_config(SWEEP).unwrap()).unwrap();
    fn check(schema: &serde_json::Value, value: &serde_json::Value, path: &str) {
        let Some(obj) = value.as_object() else { return };
        let Some(props) = schema.get("properties").and_then(|p| p.as_object()) else {
            return;
        };
        for (k, v) in obj {
            let sub = props.get(k).unwrap_or_else(|| panic!("schema lacks {path}.{k}"));
            check(sub, v, &format!("{path}.{k}"));
            if let (Some(items), Some(arr)) = (sub.get("items"), v.as_array()) {
                for x in arr {
                    check(items, x, &format!("{path}.{k}[]"));
                }
            }
        }
    }
    check(&schema, &config, "");
}

#[test]
fn minimal_config_gets_defaults() {
    let c = parse_config(&minimal("")).unwrap();
    assert_eq!(c.solver, SolverSettings::default());
    assert_eq!(c.solver.relax, 0.5);
    assert_eq!(c.solver.tol_head, 1e-4);
    assert_eq!(c.mesh.target_size, 4.0);
    assert_eq!(c.baseline_name(), "plain");
    let echoed = serde_json::to_string(&c).unwrap();
    assert_eq!(parse_config(&echoed).unwrap(), c);
}

#[test]
fn unknown_key_named() {
    let e = parse_config(&minimal(r#", "mesh_size": 3.0"#)).unwrap_err();
    assert!(e.to_string().contains("mesh_size"), "{e}");
    let e = parse_config(&minimal(r#", "solver": {"relaxation": 0.3}"#)).unwrap_err();
    assert!(e.to_string().contains("relaxation"), "{e}");
}

#[test]
fn unitless_permeability_rejected() {
    let text = minimal("").replace(r#""k": "1e-8 cm/s""#, r#""k": "10""#);
    let e = parse_config(&text).unwrap_err();
    assert!(e.to_string().contains("no unit"), "{e}");
}

#[test]
fn dangling_material_rejected() {
    let text = minimal("").replace(
        r#""reservoir_level": 1590.0}"#,
        r#""reservoir_level": 1590.0, "interventions": [{"kind": "concrete_cover", "thickness": 0.5, "material": "Asphalt"}]}"#,
    );
    let e = parse_config(&text).unwrap_err();
    assert!(e.to_string().contains("Asphalt"), "{e}");
    let text = minimal("").replace(r#"{"name": "Core", "k": "1e-8 cm/s"},"#, "");
    assert!(parse_config(&text).is_err());
}

#[test]
fn duplicate_scenario_rejected() {
    let text = minimal("").replace(
        r#"[{"name": "plain", "reservoir_level": 1590.0}]"#,
        r#"[{"name": "plain", "reservoir_level": 1590.0}, {"name": "plain", "reservoir_level": 1595.0}]"#,
    );
    let e = parse_config(&text).unwrap_err();
    assert!(e.to_string().contains("duplicate"), "{e}");
}

fn small_sweep_config() -> RunConfig {
    let mut c = coarse();
    let mut deep = c.scenarios[0].clone();
    deep.name = "shallow foundation".into();
    deep.interventions.push(crate::geometry::Intervention::FoundationDepthOverride { depth: 30.0 });
    let mut bad = c.scenarios[0].clone();
    bad.name = "overtopped".into();
    bad.reservoir_level = 1700.0;
    c.scenarios.push(deep);
    c.scenarios.push(bad);
    c.export.svg_options.glyphs = 20;
    c
}

#[test]
fn sweep_parallel_equals_sequential_and_failures_continue() {
    let c = small_sweep_config();
    let seq = run_sweep(&c, Some(1), None).unwrap();
    let par = run_sweep(&c, Some(3), None).unwrap();
    assert_eq!(seq.report_csv(), par.report_csv());
    assert_eq!(seq.failed(), ["overtopped"]);
    let shallow = seq.ratio("shallow foundation").unwrap();
    assert!(shallow < 1.0, "{shallow}");
    assert_eq!(seq.ratio("baseline"), Some(1.0));
    let csv = seq.report_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(3).unwrap().starts_with("overtopped,failed,"));
    let table = seq.text_table(true);
    assert!(table.contains("FAILED") && table.contains("overtopped: "));

    let dir = tempfile::tempdir().unwrap();
    let m = write_outputs(&seq, &c, BASELINE, dir.path()).unwrap();
    let on_disk = std::fs::read(dir.path().join("report.csv")).unwrap();
    assert_eq!(on_disk, csv.as_bytes());
    assert_eq!(m.files["report.csv"], sweep::sha256_hex(&on_disk));
    for f in ["baseline.vtk", "baseline.svg", "shallow_foundation.vtk"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("overtopped.vtk").exists());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], sweep::sha256_hex(BASELINE.as_bytes()));
    assert_eq!(manifest["scenarios"][2]["status"], "failed");
}

#[test]
fn only_selected_scenarios_run() {
    let c = small_sweep_config();
    let r = run_sweep(&c, None, Some(&["overtopped".to_string()])).unwrap();
    assert_eq!(r.outcomes.len(), 1);
    assert!(run_sweep(&c, None, Some(&["nope".to_string()])).is_err());
}

/// Instruments whose piezometer levels are the model heads at `level`
/// shifted into an instrument datum.
fn synthetic(c: &RunConfig, level: f64, discharge: Option<f64>) -> Instruments {
    let base = c.base_section().unwrap();
    let mut s = c.scenarios[0].clone();
    s.reservoir_level = level;
    let run = solve_scenario(c, &base, &s).unwrap();
    let mut text = format!("date,instrument,level_m\n2007-05-07,RESERVOIR,{level}\n");
    for p in &c.piezometers {
        let h = probe_head(&run.solution, p.location).unwrap();
        text += &format!("2007-05-07,{},{}\n", p.name, h - 1490.0);
    }
    if let Some(q) = discharge {
        text += &format!("2007-05-07,DISCHARGE,{q}\n");
    }
    read_instrument_csv(text.as_bytes()).unwrap()
}

#[test]
fn validation_self_consistent() {
    let c = coarse();
    let inst = synthetic(&c, 1582.8, None);
    let r = validate_against_instruments(&c, &inst, date()).unwrap();
    assert!(r.rms_residual <= 2.0 * c.solver.tol_head, "{}", r.rms_residual);
    assert!((r.datum_offset - 1490.0).abs() < 1e-6);
    assert!(!r.leakage_anomaly);
    assert_eq!(r.reservoir_level, 1582.8);
    assert!(r.piezometers.iter().all(|p| p.used && p.residual.is_some()));
}

#[test]
fn leakage_anomaly_flagged() {
    let c = coarse();
    let inst = synthetic(&c, 1582.8, Some(12.7));
    let r = validate_against_instruments(&c, &inst, date()).unwrap();
    assert!(r.model_q_lps <= 6.0, "{}", r.model_q_lps);
    assert_eq!(r.observed_q_lps, Some(12.7));
    assert!(r.leakage_anomaly);
    let quiet = synthetic(&c, 1582.8, Some(r.model_q_lps));
    assert!(!validate_against_instruments(&c, &quiet, date()).unwrap().leakage_anomaly);
}

#[test]
fn all_defective_is_an_error() {
    let c = coarse();
    let mut text = String::from("date,instrument,level_m\n");
    for i in 0..12 {
        let d = date() - chrono::Days::new(7 * (11 - i));
        text += &format!("{d},RESERVOIR,{}\n", 1575.0 + ((i * 7) % 5) as f64);
        for p in &c.piezometers {
            text += &format!("{d},{},70.0\n", p.name);
        }
    }
    let inst = read_instrument_csv(text.as_bytes()).unwrap();
    let st = screen_all(&inst, &c.validation.screen);
    assert_eq!(st.len(), 4);
    assert!(st.values().all(|s| s.label() == "defective"));
    let e = validate_against_instruments(&c, &inst, date()).unwrap_err();
    assert_eq!(e.to_string(), "no healthy observations");
}

#[test]
fn missing_reservoir_date_is_an_error() {
    let c = coarse();
    let inst = read_instrument_csv("date,instrument,level_m\n2007-05-08,RESERVOIR,1582.8\n".as_bytes()).unwrap();
    assert!(matches!(
        validate_against_instruments(&c, &inst, date()),
        Err(StudyError::MissingDate(_))
    ));
}

#[test]
fn calibration_run_reports_fit() {
    let mut c = coarse();
    c.calibration.target_size = Some(10.0);
    c.calibration.budget = 30;
    let inst = synthetic(&c, 1582.8, None);
    let r = run_calibration(&c, &inst, date()).unwrap();
    assert_eq!(r.start, [-6.0]);
    assert!(r.result.evaluations <= 30);
    assert!((r.result.log10_k[0] + 6.0).abs() < 0.05, "{:?}", r.result);
    let names: BTreeSet<&str> = r.observations.iter().map(String::as_str).collect();
    assert_eq!(names.len(), 4);
}
