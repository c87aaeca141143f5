use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nirp_core::equilibrium::{interior_equilibria, solve_interior_equilibrium};
use nirp_core::error::Error as CoreError;
use nirp_core::integrator::Termination;
use nirp_core::io::{
    rates_check, read_trajectory_csv, render_svg, write_trajectory_csv, RatesSeries,
};
use nirp_core::ledger::audit_trajectory;
use nirp_core::params::ModelParams;
use nirp_core::scenario::{preset, run_scenario, sweep, Scenario, SweepSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_PREDICATE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "nirp",
    version,
    about = "Stock-flow consistent Keen model with a policy-rate rule"
)]
struct Cli {
    /// Output directory for written artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Format of reports printed to stdout and of sweep grids.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Accepted for scripting; every run is deterministic.
    #[arg(long, global = true)]
    seedless: bool,

    /// Relative tolerance of the adaptive integrator; the absolute
    /// tolerance is set to 1% of it.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Simulation horizon in years.
    #[arg(long, global = true)]
    horizon: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset (fig2..fig6) or a scenario JSON file.
    Simulate { scenario: String },
    /// Print the interior equilibrium.
    Equilibrium {
        /// Take parameters from a preset or scenario file instead of the
        /// defaults.
        #[arg(long)]
        scenario: Option<String>,
        /// Equilibrium policy rate; ignored under a fixed lending rate.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        policy_rate: f64,
        /// List every interior equilibrium instead of the selected one.
        #[arg(long)]
        all: bool,
    },
    /// Run a parameter grid described by a sweep spec JSON file.
    Sweep { spec: PathBuf },
    /// Re-audit the accounting identities of a trajectory CSV.
    Audit {
        trajectory: PathBuf,
        /// Preset or scenario file giving the parameters; defaults to
        /// scenario.json next to the CSV.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Spread statistics of a historical rates CSV.
    RatesCheck { rates: PathBuf },
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if arg.ends_with(".json") || path.exists() {
        let text = fs::read_to_string(path).map_err(|e| CoreError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Scenario::from_json(&text).with_context(|| format!("reading {}", path.display()))
    } else {
        Ok(preset(arg)?)
    }
}

fn apply_overrides(cli: &Cli, s: &mut Scenario) {
    if let Some(h) = cli.horizon {
        s.settings.horizon = h;
    }
    if let Some(tol) = cli.tol {
        s.settings.rel_tol = tol;
        s.settings.abs_tol = tol * 1e-2;
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        CoreError::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn print_report(format: Format, report: &Value) {
    match format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(report).unwrap_or_default()
        ),
        Format::Csv => {
            println!("key,value");
            if let Value::Object(map) = report {
                for (k, v) in map {
                    match v {
                        Value::String(s) => println!("{k},{s}"),
                        Value::Object(_) | Value::Array(_) => {
                            println!("{k},\"{}\"", v.to_string().replace('"', "\"\""))
                        }
                        other => println!("{k},{other}"),
                    }
                }
            }
        }
    }
}

fn simulate(cli: &Cli, arg: &str) -> Result<u8> {
    let mut scenario = load_scenario(arg)?;
    apply_overrides(cli, &mut scenario);
    let run = run_scenario(&scenario)?;

    fs::create_dir_all(&cli.out).map_err(|e| CoreError::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let mut csv = Vec::new();
    write_trajectory_csv(&run.trajectory, &mut csv)?;
    write_file(&cli.out.join("trajectory.csv"), csv)?;
    write_file(
        &cli.out.join("trajectory.svg"),
        render_svg(&run.trajectory, &scenario.name)?,
    )?;
    write_file(
        &cli.out.join("audit.json"),
        serde_json::to_string_pretty(&run.audit)? + "\n",
    )?;
    write_file(&cli.out.join("scenario.json"), scenario.to_json()? + "\n")?;
    if let Some(outcome) = &run.outcome {
        write_file(
            &cli.out.join("outcome.json"),
            serde_json::to_string_pretty(outcome)? + "\n",
        )?;
    }

    let last = run.trajectory.last();
    let report = json!({
        "scenario": scenario.name,
        "termination": run.trajectory.termination.as_str(),
        "t_end": last.t,
        "samples": run.trajectory.samples.len(),
        "omega": last.core.wage_share,
        "lambda": last.core.employment,
        "ell": last.core.private_debt_ratio,
        "rho": last.core.target_rate,
        "r_g": last.core.policy_rate,
        "b": last.aux.gov_debt_ratio,
        "inflation": last.derived.inflation,
        "min_r_g": run.trajectory.min_policy_rate(),
        "audit_pass": run.audit.pass,
        "outcome_pass": run.outcome.as_ref().map(|o| o.pass),
        "out": cli.out.display().to_string(),
    });
    print_report(cli.format, &report);
    eprintln!("integration took {:.1} ms", run.elapsed.as_secs_f64() * 1e3);
    Ok(
        if run.trajectory.termination == Termination::SingularState {
            EXIT_NUMERICAL
        } else if run.pass() {
            0
        } else {
            EXIT_PREDICATE
        },
    )
}

fn equilibrium(cli: &Cli, scenario: Option<&str>, policy_rate: f64, all: bool) -> Result<u8> {
    let params = match scenario {
        Some(arg) => load_scenario(arg)?.params,
        None => ModelParams::default(),
    };
    let value = if all {
        serde_json::to_value(interior_equilibria(&params, policy_rate)?)?
    } else {
        serde_json::to_value(solve_interior_equilibrium(&params, policy_rate)?)?
    };
    match (cli.format, &value) {
        (Format::Json, _) | (_, Value::Array(_)) => {
            println!("{}", serde_json::to_string_pretty(&value)?)
        }
        (Format::Csv, _) => print_report(Format::Csv, &value),
    }
    Ok(0)
}

fn run_sweep(cli: &Cli, spec_path: &Path) -> Result<u8> {
    let text = fs::read_to_string(spec_path).map_err(|e| CoreError::Io {
        path: spec_path.to_path_buf(),
        source: e,
    })?;
    let spec = SweepSpec::from_json(&text)?;
    let mut base = spec.base.resolve()?;
    apply_overrides(cli, &mut base);
    let grid = sweep(&spec, &base)?;

    fs::create_dir_all(&cli.out).map_err(|e| CoreError::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let path = match cli.format {
        Format::Csv => {
            let p = cli.out.join("grid.csv");
            write_file(&p, grid.to_csv())?;
            p
        }
        Format::Json => {
            let p = cli.out.join("grid.json");
            write_file(&p, serde_json::to_string_pretty(&grid)? + "\n")?;
            p
        }
    };
    let mut counts = serde_json::Map::new();
    for cell in &grid.cells {
        let key = cell
            .termination
            .map_or("error".to_string(), |t| t.as_str().to_string());
        let n = counts.get(&key).and_then(Value::as_u64).unwrap_or(0);
        counts.insert(key, json!(n + 1));
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "cells": grid.cells.len(),
            "terminations": counts,
            "grid": path.display().to_string(),
        }))?
    );
    Ok(0)
}

fn audit(cli: &Cli, csv_path: &Path, scenario: Option<&str>) -> Result<u8> {
    let scenario = match scenario {
        Some(arg) => load_scenario(arg)?,
        None => {
            let sibling = csv_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("scenario.json");
            if !sibling.exists() {
                return Err(CoreError::Malformed {
                    context: "audit".into(),
                    message: format!(
                        "no --scenario given and {} does not exist",
                        sibling.display()
                    ),
                }
                .into());
            }
            load_scenario(&sibling.to_string_lossy())?
        }
    };
    let file = fs::File::open(csv_path).map_err(|e| CoreError::Io {
        path: csv_path.to_path_buf(),
        source: e,
    })?;
    let traj = read_trajectory_csv(file, &scenario.params)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    let report = audit_trajectory(&traj, &scenario.params)?;
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Csv => print!("{}", report.to_csv()),
    }
    Ok(if report.pass { 0 } else { EXIT_PREDICATE })
}

fn check_rates(cli: &Cli, path: &Path) -> Result<u8> {
    let file = fs::File::open(path).map_err(|e| CoreError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let series =
        RatesSeries::from_csv(file).with_context(|| format!("reading {}", path.display()))?;
    let report = rates_check(&series)?;
    let value = serde_json::to_value(&report)?;
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&value)?),
        Format::Csv => {
            println!("series,mean,std,fraction_positive");
            for (name, s) in [
                ("lending_spread", report.lending_spread),
                ("deposit_spread", report.deposit_spread),
            ] {
                println!("{name},{},{},{}", s.mean, s.std, s.fraction_positive);
            }
        }
    }
    eprintln!("rates check: {}", if report.pass { "PASS" } else { "FAIL" });
    Ok(if report.pass { 0 } else { EXIT_PREDICATE })
}

/// Usage and input errors exit 1; failures of the numerics exit 2.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(
            CoreError::Domain { .. }
            | CoreError::SingularState(_)
            | CoreError::NoInteriorEquilibrium(_)
            | CoreError::DegenerateEquilibrium(_)
            | CoreError::GovDebtUndefined(_)
            | CoreError::EmptyTrajectory
            | CoreError::InsufficientData { .. },
        ) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate { scenario } => simulate(&cli, scenario),
        Command::Equilibrium {
            scenario,
            policy_rate,
            all,
        } => equilibrium(&cli, scenario.as_deref(), *policy_rate, *all),
        Command::Sweep { spec } => run_sweep(&cli, spec),
        Command::Audit {
            trajectory,
            scenario,
        } => audit(&cli, trajectory, scenario.as_deref()),
        Command::RatesCheck { rates } => check_rates(&cli, rates),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
