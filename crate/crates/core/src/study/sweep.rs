//! Scenario sweeps: parallel solves, report tables and exported files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{DischargeThresholds, RunConfig};
use super::StudyError;
use crate::fem::{solve_section, SeepageSolution};
use crate::geometry::{DamSection, Scenario};
use crate::mesh::triangulate;
use crate::postproc::svg::render_svg;
use crate::postproc::vtk::write_vtk;
use crate::postproc::{exit_gradient, gradient_field, phreatic_line, total_discharge, DischargeReport};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub discharge: DischargeReport,
    pub outer_iterations: usize,
    pub max_exit_gradient: Option<f64>,
    /// Elevation of the downstream end of the phreatic line, m a.s.l.
    pub phreatic_exit_elevation: Option<f64>,
    pub mass_balance_error: f64,
    /// Largest gradient among saturated elements and the zone holding it.
    pub max_gradient: Option<(f64, String)>,
}

/// A solved scenario with what is needed for exports.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub summary: ScenarioSummary,
    pub section: DamSection,
    pub solution: Arc<SeepageSolution>,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    /// Failure message for geometry, mesh or solver errors and unconverged solves.
    pub result: Result<ScenarioRun, String>,
    pub seconds: f64,
}

impl ScenarioOutcome {
    pub fn summary(&self) -> Option<&ScenarioSummary> {
        self.result.as_ref().ok().map(|r| &r.summary)
    }
}

pub fn solve_scenario(config: &RunConfig, base: &DamSection, scenario: &Scenario) -> Result<ScenarioRun, String> {
    let section = config.scenario_section(base, scenario).map_err(|e| e.to_string())?;
    let mesh = triangulate(&section, config.mesh.target_size, &[]).map_err(|e| format!("mesh: {e}"))?;
    let solution = solve_section(&mesh, &section, &config.solver).map_err(|e| format!("solver: {e}"))?;
    if !solution.converged {
        return Err(format!(
            "not converged after {} outer iterations (last change {:.3e} m){}",
            solution.outer_iterations,
            solution.last_change,
            solution.diagnostic.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
        ));
    }
    let discharge = total_discharge(&solution, &section, &scenario.name).map_err(|e| e.to_string())?;
    let field = gradient_field(&solution);
    let max_gradient = field.max_saturated(&solution).map(|(e, g)| {
        let zone = solution.mesh.elements[e].zone;
        (g, section.zones[zone].name.clone())
    });
    let summary = ScenarioSummary {
        discharge,
        outer_iterations: solution.outer_iterations,
        max_exit_gradient: exit_gradient(&solution, &field).map(|g| g.value),
        phreatic_exit_elevation: phreatic_line(&solution).exit_point().map(|p| p.y),
        mass_balance_error: solution.mass_balance().relative_error(),
        max_gradient,
    };
    Ok(ScenarioRun {
        summary,
        section,
        solution: Arc::new(solution),
    })
}

fn run_one(config: &RunConfig, base: &DamSection, scenario: &Scenario) -> ScenarioOutcome {
    let t = Instant::now();
    let result = solve_scenario(config, base, scenario);
    if let Err(e) = &result {
        log::error!("scenario '{}' failed: {e}", scenario.name);
    } else {
        log::info!("scenario '{}' solved in {:.1} s", scenario.name, t.elapsed().as_secs_f64());
    }
    ScenarioOutcome {
        name: scenario.name.clone(),
        result,
        seconds: t.elapsed().as_secs_f64(),
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub baseline: String,
    /// In configuration order.
    pub outcomes: Vec<ScenarioOutcome>,
    pub thresholds: DischargeThresholds,
}

/// Solves the named scenarios (all when `only` is `None`) on `jobs` workers.
pub fn run_sweep(config: &RunConfig, jobs: Option<usize>, only: Option<&[String]>) -> Result<SweepResult, StudyError> {
    let base = config.base_section()?;
    let selected: Vec<&Scenario> = match only {
        None => config.scenarios.iter().collect(),
        Some(names) => {
            let mut v = Vec::new();
            for n in names {
                v.push(
                    config
                        .scenario(n)
                        .ok_or_else(|| StudyError::Config(format!("no scenario named '{n}'")))?,
                );
            }
            v
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(StudyError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| StudyError::Config(e.to_string()))?;
    let solved: BTreeMap<String, ScenarioOutcome> = pool.install(|| {
        selected
            .par_iter()
            .map(|s| (s.name.clone(), run_one(config, &base, s)))
            .collect()
    });
    let mut solved = solved;
    let outcomes = selected
        .iter()
        .map(|s| solved.remove(&s.name).expect("every scenario solved"))
        .collect();
    Ok(SweepResult {
        baseline: config.baseline_name().to_owned(),
        outcomes,
        thresholds: config.discharge_thresholds.clone(),
    })
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn get(&self, name: &str) -> Option<&ScenarioOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.outcomes
            .iter()
            .filter(|o| o.result.is_err())
            .map(|o| o.name.as_str())
            .collect()
    }

    /// Scenario total over baseline total, when both converged.
    pub fn ratio(&self, name: &str) -> Option<f64> {
        let b = self.get(&self.baseline)?.summary()?.discharge.q_total_lps;
        let q = self.get(name)?.summary()?.discharge.q_total_lps;
        (b > 0.0).then(|| q / b)
    }

    /// Report table; contains no timing so repeated runs compare equal.
    pub fn report_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario",
            "status",
            "outer_iterations",
            "q_per_meter_m3s",
            "q_total_lps",
            "ratio_to_baseline",
            "max_exit_gradient",
            "phreatic_exit_elevation_m",
            "mass_balance_error",
            "discharge_band",
            "message",
        ])
        .expect("in-memory write");
        for o in &self.outcomes {
            let row = match &o.result {
                Ok(r) => {
                    let s = &r.summary;
                    vec![
                        o.name.clone(),
                        "converged".into(),
                        s.outer_iterations.to_string(),
                        s.discharge.q_per_meter.to_string(),
                        s.discharge.q_total_lps.to_string(),
                        num(self.ratio(&o.name)),
                        num(s.max_exit_gradient),
                        num(s.phreatic_exit_elevation),
                        s.mass_balance_error.to_string(),
                        self.thresholds.classify(s.discharge.q_total_lps).into(),
                        String::new(),
                    ]
                }
                Err(e) => {
                    let mut v = vec![o.name.clone(), "failed".into()];
                    v.extend(std::iter::repeat(String::new()).take(8));
                    v.push(e.clone());
                    v
                }
            };
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Aligned summary table, optionally with solve times.
    pub fn text_table(&self, with_times: bool) -> String {
        let mut header = vec!["scenario", "status", "q m3/s/m", "Q L/s", "ratio", "exit grad", "exit elev", "band"];
        if with_times {
            header.push("time s");
        }
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for o in &self.outcomes {
            let mut r = vec![o.name.clone()];
            match o.summary() {
                Some(s) => r.extend([
                    "ok".into(),
                    format!("{:.3e}", s.discharge.q_per_meter),
                    format!("{:.2}", s.discharge.q_total_lps),
                    self.ratio(&o.name).map(|x| format!("{x:.2}")).unwrap_or("-".into()),
                    s.max_exit_gradient.map(|x| format!("{x:.3}")).unwrap_or("-".into()),
                    s.phreatic_exit_elevation.map(|x| format!("{x:.2}")).unwrap_or("-".into()),
                    self.thresholds.classify(s.discharge.q_total_lps).into(),
                ]),
                None => r.extend(["FAILED".into(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into()]),
            }
            if with_times {
                r.push(format!("{:.1}", o.seconds));
            }
            rows.push(r);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        for o in &self.outcomes {
            if let Err(e) = &o.result {
                let _ = writeln!(out, "{}: {e}", o.name);
            }
        }
        out
    }
}

/// File-name stem for a scenario.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestScenario {
    pub name: String,
    pub status: String,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    /// The configuration with every default filled in.
    pub config: RunConfig,
    pub scenarios: Vec<ManifestScenario>,
    /// SHA-256 per written file, keyed by name relative to the output directory.
    pub files: BTreeMap<String, String>,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut BTreeMap<String, String>) -> Result<(), StudyError> {
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| StudyError::Io(format!("{}: {e}", path.display())))?;
    files.insert(name.to_owned(), sha256_hex(bytes));
    Ok(())
}

/// Writes report tables, per-scenario exports and the manifest into `dir`.
pub fn write_outputs(
    sweep: &SweepResult,
    config: &RunConfig,
    config_text: &str,
    dir: &Path,
) -> Result<Manifest, StudyError> {
    std::fs::create_dir_all(dir).map_err(|e| StudyError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = BTreeMap::new();
    write_file(dir, "report.csv", sweep.report_csv().as_bytes(), &mut files)?;
    write_file(dir, "report.txt", sweep.text_table(false).as_bytes(), &mut files)?;
    let mut used = BTreeMap::<String, usize>::new();
    let mut scenarios = Vec::new();
    for o in &sweep.outcomes {
        let mut stem = slug(&o.name);
        let n = used.entry(stem.clone()).or_default();
        *n += 1;
        if *n > 1 {
            stem = format!("{stem}_{n}");
        }
        let mut written = Vec::new();
        if let Ok(run) = &o.result {
            if config.export.vtk {
                let mut buf = Vec::new();
                write_vtk(&run.solution, &mut buf).map_err(|e| StudyError::Io(e.to_string()))?;
                let name = format!("{stem}.vtk");
                write_file(dir, &name, &buf, &mut files)?;
                written.push(name);
            }
            if config.export.svg {
                let svg = render_svg(&run.solution, &run.section, &config.export.svg_options);
                let name = format!("{stem}.svg");
                write_file(dir, &name, svg.as_bytes(), &mut files)?;
                written.push(name);
            }
        }
        scenarios.push(ManifestScenario {
            name: o.name.clone(),
            status: if o.result.is_ok() { "converged" } else { "failed" }.into(),
            files: written,
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: config.clone(),
        scenarios,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| StudyError::Io(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json + "\n").map_err(|e| StudyError::Io(e.to_string()))?;
    Ok(manifest)
}
