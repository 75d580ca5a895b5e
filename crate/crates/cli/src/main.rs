use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use damseep::calibration::ScreenThresholds;
use damseep::study::{
    parse_config, read_instrument_csv, run_calibration, run_sweep, screen_all, validate_against_instruments,
    write_outputs, Instruments, RunConfig, StudyError, SweepResult,
};
use chrono::NaiveDate;

/// Steady seepage analysis and scenario studies for zoned embankment dams.
#[derive(Parser)]
#[command(name = "damseep", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario (the baseline by default) and write its exports.
    Solve {
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve every scenario of a configuration.
    Sweep {
        config: PathBuf,
        /// Worker threads; all cores by default.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the configured zone permeabilities to the readings of one date.
    Calibrate {
        config: PathBuf,
        #[command(flatten)]
        obs: Observations,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare model heads and discharge with the readings of one date.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        obs: Observations,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flag piezometers whose readings do not follow the reservoir.
    Screen {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, default_value_t = ScreenThresholds::default().min_correlation)]
        min_correlation: f64,
        #[arg(long, default_value_t = ScreenThresholds::default().min_variance)]
        min_variance: f64,
        #[arg(long, default_value_t = ScreenThresholds::default().min_samples)]
        min_samples: usize,
    },
}

#[derive(Args)]
struct Observations {
    /// Instrument CSV with header `date,instrument,level_m`.
    #[arg(long)]
    observations: PathBuf,
    /// Reading date, YYYY-MM-DD.
    #[arg(long)]
    date: NaiveDate,
}

enum Failure {
    Config(String),
    Scenario(String),
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Scenario { .. } => Failure::Scenario(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, String), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let config = parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((config, text))
}

fn load_instruments(path: &Path) -> Result<Instruments, Failure> {
    let f = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    read_instrument_csv(BufReader::new(f)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn out_dir(config: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&config.output_dir))
}

fn finish_sweep(sweep: &SweepResult, config: &RunConfig, text: &str, dir: &Path) -> Result<(), Failure> {
    write_outputs(sweep, config, text, dir)?;
    print!("{}", sweep.text_table(true));
    println!("outputs in {}", dir.display());
    let failed = sweep.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Scenario(format!("{} scenario(s) failed: {}", failed.len(), failed.join(", "))))
    }
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    let json = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    let path = dir.join(name);
    std::fs::write(&path, json + "\n").map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    println!("report in {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { config, scenario, out } => {
            let (config, text) = load_config(&config)?;
            let name = scenario.unwrap_or_else(|| config.baseline_name().to_owned());
            let sweep = run_sweep(&config, None, Some(&[name]))?;
            finish_sweep(&sweep, &config, &text, &out_dir(&config, out))
        }
        Command::Sweep { config, jobs, out } => {
            let (config, text) = load_config(&config)?;
            let sweep = run_sweep(&config, jobs, None)?;
            finish_sweep(&sweep, &config, &text, &out_dir(&config, out))
        }
        Command::Calibrate { config, obs, out } => {
            let (config, _) = load_config(&config)?;
            let instruments = load_instruments(&obs.observations)?;
            let r = run_calibration(&config, &instruments, obs.date)?;
            for (z, k) in r.result.zones.iter().zip(&r.result.log10_k) {
                println!("{z}: log10 k = {k:.3} (k = {:.3e} m/s)", 10f64.powf(*k));
            }
            println!(
                "datum offset {:.3} m, rms residual {:.4} m, {} evaluations{}",
                r.result.datum_offset,
                r.result.rms_residual,
                r.result.evaluations,
                if r.result.converged { "" } else { " (budget exhausted)" }
            );
            write_json(&out_dir(&config, out), "calibration.json", &r)
        }
        Command::Validate { config, obs, out } => {
            let (config, _) = load_config(&config)?;
            let instruments = load_instruments(&obs.observations)?;
            let r = validate_against_instruments(&config, &instruments, obs.date)?;
            println!("{} at reservoir {:.2} m on {}", r.scenario, r.reservoir_level, r.date);
            for p in &r.piezometers {
                match (p.model_head, p.residual) {
                    (Some(h), Some(res)) => println!("  {:<14} model {h:>9.3}  residual {res:>8.3}", p.name),
                    _ => println!("  {:<14} not used ({})", p.name, p.screen.label()),
                }
            }
            println!("datum offset {:.3} m, rms residual {:.4} m", r.datum_offset, r.rms_residual);
            match r.observed_q_lps {
                Some(q) => println!("discharge: model {:.2} L/s, observed {q:.2} L/s", r.model_q_lps),
                None => println!("discharge: model {:.2} L/s", r.model_q_lps),
            }
            if r.leakage_anomaly {
                println!("LEAKAGE ANOMALY: observed discharge exceeds {}x the model value", config.validation.anomaly_ratio);
            }
            write_json(&out_dir(&config, out), "validation.json", &r)
        }
        Command::Screen {
            observations,
            min_correlation,
            min_variance,
            min_samples,
        } => {
            let instruments = load_instruments(&observations)?;
            let t = ScreenThresholds {
                min_correlation,
                min_variance,
                min_samples,
            };
            for (name, status) in screen_all(&instruments, &t) {
                println!("{name}: {}", serde_json::to_string(&status).map_err(|e| Failure::Config(e.to_string()))?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Scenario(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
