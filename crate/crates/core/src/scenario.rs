//! Scenario presets, expected-outcome predicates and parameter sweeps.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::equilibrium::{realized_policy_rate, solve_interior_equilibrium};
use crate::error::{Error, Result};
use crate::integrator::{integrate, Sample, SolverSettings, Termination, Trajectory};
use crate::ledger::{audit_trajectory, AuditReport};
use crate::model::{AuxState, CoreState};
use crate::params::ModelParams;

/// Bumped whenever a preset changes.
pub const PRESET_VERSION: u32 = 1;

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    WageShare,
    Employment,
    PrivateDebtRatio,
    TargetRate,
    PolicyRate,
    GovDebtRatio,
    PriceLevel,
    RealOutput,
    ProfitShare,
    Inflation,
    LendingRate,
    CapitalGrowth,
}

impl Observable {
    pub fn value(self, s: &Sample) -> f64 {
        match self {
            Observable::WageShare => s.core.wage_share,
            Observable::Employment => s.core.employment,
            Observable::PrivateDebtRatio => s.core.private_debt_ratio,
            Observable::TargetRate => s.core.target_rate,
            Observable::PolicyRate => s.core.policy_rate,
            Observable::GovDebtRatio => s.aux.gov_debt_ratio,
            Observable::PriceLevel => s.aux.price_level,
            Observable::RealOutput => s.aux.real_output,
            Observable::ProfitShare => s.derived.profit_share,
            Observable::Inflation => s.derived.inflation,
            Observable::LendingRate => s.derived.lending_rate,
            Observable::CapitalGrowth => s.derived.capital_growth,
        }
    }

    fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

/// A quantitative check on a finished trajectory. Bounds are inclusive and
/// either may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeCheck {
    /// Value at the last sample.
    Final {
        observable: Observable,
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    /// Minimum over the whole trajectory.
    Minimum {
        observable: Observable,
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    /// Strictly positive at every sample in the final `fraction` of the
    /// trajectory's time span.
    PositiveOverFinal {
        observable: Observable,
        fraction: f64,
    },
    /// Final value below the trajectory's peak.
    DeclinesFromPeak { observable: Observable },
    /// Final (wage share, employment, debt ratio) within `tol` (sup-norm) of
    /// the interior equilibrium at the realised policy rate.
    NearInteriorEquilibrium { tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub description: String,
    pub value: f64,
    pub pass: bool,
}

fn within(v: f64, min: Option<f64>, max: Option<f64>) -> bool {
    min.is_none_or(|m| v >= m) && max.is_none_or(|m| v <= m) && !v.is_nan()
}

fn bounds(min: Option<f64>, max: Option<f64>) -> String {
    let lo = min.map_or("-inf".to_string(), |v| v.to_string());
    let hi = max.map_or("+inf".to_string(), |v| v.to_string());
    format!("[{lo}, {hi}]")
}

impl OutcomeCheck {
    pub fn evaluate(&self, traj: &Trajectory, params: &ModelParams) -> CheckResult {
        match *self {
            OutcomeCheck::Final {
                observable,
                min,
                max,
            } => {
                let v = observable.value(traj.last());
                CheckResult {
                    description: format!("final {} in {}", observable.name(), bounds(min, max)),
                    value: v,
                    pass: within(v, min, max),
                }
            }
            OutcomeCheck::Minimum {
                observable,
                min,
                max,
            } => {
                let v = traj
                    .samples
                    .iter()
                    .map(|s| observable.value(s))
                    .fold(f64::INFINITY, f64::min);
                CheckResult {
                    description: format!("min {} in {}", observable.name(), bounds(min, max)),
                    value: v,
                    pass: within(v, min, max),
                }
            }
            OutcomeCheck::PositiveOverFinal {
                observable,
                fraction,
            } => {
                let t_from = traj.end_time() * (1.0 - fraction);
                let v = traj
                    .tail_from(t_from)
                    .map(|s| observable.value(s))
                    .fold(f64::INFINITY, f64::min);
                CheckResult {
                    description: format!(
                        "{} > 0 over final {}% of the run",
                        observable.name(),
                        fraction * 100.0
                    ),
                    value: v,
                    pass: v > 0.0,
                }
            }
            OutcomeCheck::DeclinesFromPeak { observable } => {
                let peak = traj
                    .samples
                    .iter()
                    .map(|s| observable.value(s))
                    .fold(f64::NEG_INFINITY, f64::max);
                let last = observable.value(traj.last());
                CheckResult {
                    description: format!("final {} below its peak", observable.name()),
                    value: last / peak,
                    pass: last < peak,
                }
            }
            OutcomeCheck::NearInteriorEquilibrium { tol } => {
                let r_g = realized_policy_rate(traj, 10.0);
                let dist = solve_interior_equilibrium(params, r_g)
                    .map(|eq| {
                        let c = traj.last().core;
                        [
                            c.wage_share - eq.omega_bar,
                            c.employment - eq.lambda_bar,
                            c.private_debt_ratio - eq.ell_bar,
                        ]
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                    })
                    .unwrap_or(f64::INFINITY);
                CheckResult {
                    description: format!("final state within {tol} of the interior equilibrium"),
                    value: dist,
                    pass: dist <= tol,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub termination: Termination,
    #[serde(default)]
    pub checks: Vec<OutcomeCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub expected_termination: Termination,
    pub termination: Termination,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl ExpectedOutcome {
    pub fn evaluate(&self, traj: &Trajectory, params: &ModelParams) -> OutcomeReport {
        let checks: Vec<CheckResult> = self
            .checks
            .iter()
            .map(|c| c.evaluate(traj, params))
            .collect();
        OutcomeReport {
            expected_termination: self.termination,
            termination: traj.termination,
            pass: traj.termination == self.termination && checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub core: CoreState,
    pub aux: AuxState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub params: ModelParams,
    pub initial: InitialState,
    #[serde(default)]
    pub settings: SolverSettings,
    #[serde(default)]
    pub expected_outcome: Option<ExpectedOutcome>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::malformed(
                format!("scenario (line {}, column {})", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sets a numeric field addressed by a dotted path such as
    /// `initial.core.private_debt_ratio` or `params.rate_adjust_speed`.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Scenario> {
        let mut doc = serde_json::to_value(self)?;
        let pointer = format!("/{}", path.replace('.', "/"));
        let slot = doc
            .pointer_mut(&pointer)
            .ok_or_else(|| Error::malformed(format!("sweep axis `{path}`"), "no such field"))?;
        if !slot.is_number() {
            return Err(Error::malformed(
                format!("sweep axis `{path}`"),
                "field is not numeric",
            ));
        }
        *slot = serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| Error::malformed(format!("sweep axis `{path}`"), "non-finite value"))?;
        Ok(serde_json::from_value(doc)?)
    }
}

fn no_policy_preset(name: &str, debt: f64, horizon: f64, expected: ExpectedOutcome) -> Scenario {
    Scenario {
        name: name.to_string(),
        version: Some(PRESET_VERSION),
        params: ModelParams::fixed_rate(0.03),
        initial: InitialState {
            core: CoreState::new(0.8, 0.9, debt, 0.0, 0.0),
            aux: AuxState::initial(0.0),
        },
        settings: SolverSettings::with_horizon(horizon),
        expected_outcome: Some(expected),
    }
}

fn policy_preset(name: &str, debt: f64, horizon: f64, expected: ExpectedOutcome) -> Scenario {
    Scenario {
        name: name.to_string(),
        version: Some(PRESET_VERSION),
        params: ModelParams::with_policy(0.2, 0.0, 0.03, 0.1, 0.2),
        initial: InitialState {
            core: CoreState::new(0.8, 0.9, debt, 0.0, 0.0),
            aux: AuxState::initial(0.4),
        },
        settings: SolverSettings::with_horizon(horizon),
        expected_outcome: Some(expected),
    }
}

fn converged(checks: Vec<OutcomeCheck>) -> ExpectedOutcome {
    ExpectedOutcome {
        termination: Termination::ConvergedToEquilibrium,
        checks,
    }
}

/// The five shipped scenarios.
pub fn preset(name: &str) -> Result<Scenario> {
    use Observable::*;
    use OutcomeCheck::*;
    let s = match name {
        "fig2" => no_policy_preset(
            "fig2",
            0.6,
            300.0,
            converged(vec![
                NearInteriorEquilibrium { tol: 1e-3 },
                Final {
                    observable: Inflation,
                    min: Some(0.0),
                    max: None,
                },
            ]),
        ),
        "fig3" => no_policy_preset(
            "fig3",
            6.0,
            150.0,
            ExpectedOutcome {
                termination: Termination::DebtBlowup,
                checks: vec![
                    DeclinesFromPeak {
                        observable: RealOutput,
                    },
                    Final {
                        observable: Inflation,
                        min: None,
                        max: Some(0.0),
                    },
                ],
            },
        ),
        "fig4" => policy_preset(
            "fig4",
            0.6,
            300.0,
            converged(vec![
                Final {
                    observable: TargetRate,
                    min: Some(0.010),
                    max: Some(0.016),
                },
                Final {
                    observable: LendingRate,
                    min: Some(0.040),
                    max: Some(0.046),
                },
            ]),
        ),
        "fig5" => policy_preset(
            "fig5",
            6.0,
            400.0,
            converged(vec![
                Minimum {
                    observable: PolicyRate,
                    min: Some(-0.025),
                    max: Some(-0.005),
                },
                PositiveOverFinal {
                    observable: PolicyRate,
                    fraction: 0.1,
                },
            ]),
        ),
        "fig6" => policy_preset(
            "fig6",
            8.0,
            400.0,
            converged(vec![
                Minimum {
                    observable: PolicyRate,
                    min: Some(-0.030),
                    max: Some(-0.012),
                },
                PositiveOverFinal {
                    observable: PolicyRate,
                    fraction: 0.1,
                },
            ]),
        ),
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                available: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(s)
}

pub struct ScenarioRun {
    pub name: String,
    pub trajectory: Trajectory,
    pub audit: AuditReport,
    pub outcome: Option<OutcomeReport>,
    pub elapsed: Duration,
}

impl ScenarioRun {
    /// Audit passed and, if the scenario states one, the expected outcome
    /// holds.
    pub fn pass(&self) -> bool {
        self.audit.pass && self.outcome.as_ref().is_none_or(|o| o.pass)
    }
}

/// Integrates, audits and evaluates the expected outcome.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun> {
    let start = Instant::now();
    let trajectory = integrate(s.initial.core, s.initial.aux, &s.params, &s.settings)?;
    let elapsed = start.elapsed();
    let audit = audit_trajectory(&trajectory, &s.params)?;
    let outcome = s
        .expected_outcome
        .as_ref()
        .map(|e| e.evaluate(&trajectory, &s.params));
    Ok(ScenarioRun {
        name: s.name.clone(),
        trajectory,
        audit,
        outcome,
        elapsed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    List { values: Vec<f64> },
    Range { min: f64, max: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    /// Dotted path into the scenario document.
    pub name: String,
    #[serde(flatten)]
    pub values: AxisValues,
}

impl SweepAxis {
    pub fn points(&self) -> Vec<f64> {
        match &self.values {
            AxisValues::List { values } => values.clone(),
            AxisValues::Range { min, max, steps } => match steps {
                0 => Vec::new(),
                1 => vec![*min],
                n => (0..*n)
                    .map(|k| min + (max - min) * k as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Preset(String),
    Inline(Box<Scenario>),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<Scenario> {
        match self {
            ScenarioRef::Preset(name) => preset(name),
            ScenarioRef::Inline(s) => Ok((**s).clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ScenarioRef,
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::malformed(
                format!("sweep spec (line {}, column {})", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    /// Grid coordinates, row-major with the last axis varying fastest.
    pub fn cells(&self) -> Result<Vec<Vec<f64>>> {
        if self.axes.is_empty() {
            return Err(Error::malformed(
                "sweep spec",
                "at least one axis is required",
            ));
        }
        let mut cells: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let pts = axis.points();
            if pts.is_empty() {
                return Err(Error::malformed(
                    format!("sweep axis `{}`", axis.name),
                    "axis has no points",
                ));
            }
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    pts.iter().map(move |v| {
                        let mut next = c.clone();
                        next.push(*v);
                        next
                    })
                })
                .collect();
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub coords: Vec<f64>,
    pub termination: Option<Termination>,
    pub t_end: f64,
    pub min_policy_rate: f64,
    pub final_core: Option<CoreState>,
    pub final_aux: Option<AuxState>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<String>,
    pub cells: Vec<SweepCell>,
}

/// Runs one grid cell. Failures are recorded in the cell rather than
/// propagated.
pub fn run_cell(base: &Scenario, axes: &[SweepAxis], index: usize, coords: &[f64]) -> SweepCell {
    let outcome = axes
        .iter()
        .zip(coords)
        .try_fold(base.clone(), |s, (axis, v)| s.with_value(&axis.name, *v))
        .and_then(|s| integrate(s.initial.core, s.initial.aux, &s.params, &s.settings));
    match outcome {
        Ok(traj) => {
            let last = traj.last();
            SweepCell {
                index,
                coords: coords.to_vec(),
                termination: Some(traj.termination),
                t_end: last.t,
                min_policy_rate: traj.min_policy_rate(),
                final_core: Some(last.core),
                final_aux: Some(last.aux),
                error: None,
            }
        }
        Err(e) => SweepCell {
            index,
            coords: coords.to_vec(),
            termination: None,
            t_end: f64::NAN,
            min_policy_rate: f64::NAN,
            final_core: None,
            final_aux: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every cell of the grid on the rayon pool; results are ordered by
/// cell index.
pub fn sweep(spec: &SweepSpec, base: &Scenario) -> Result<SweepGrid> {
    let cells = spec.cells()?;
    let results: Vec<SweepCell> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| run_cell(base, &spec.axes, i, c))
        .collect();
    Ok(SweepGrid {
        axes: spec.axes.iter().map(|a| a.name.clone()).collect(),
        cells: results,
    })
}

impl SweepGrid {
    /// One CSV row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for a in &self.axes {
            out.push(',');
            out.push_str(a);
        }
        out.push_str(",termination,t_end,min_policy_rate,omega,lambda,ell,rho,r_g,b,error\n");
        for c in &self.cells {
            let mut fields = vec![c.index.to_string()];
            fields.extend(c.coords.iter().map(|v| format!("{v:.17e}")));
            fields.push(
                c.termination
                    .map_or(String::new(), |t| t.as_str().to_string()),
            );
            fields.push(format!("{:.17e}", c.t_end));
            fields.push(format!("{:.17e}", c.min_policy_rate));
            match (c.final_core, c.final_aux) {
                (Some(core), Some(aux)) => {
                    fields.extend(core.to_array().iter().map(|v| format!("{v:.17e}")));
                    fields.push(format!("{:.17e}", aux.gov_debt_ratio));
                }
                _ => fields.extend(std::iter::repeat_n(String::new(), 6)),
            }
            let err = c.error.clone().unwrap_or_default();
            fields.push(if err.contains([',', '"', '\n']) {
                format!("\"{}\"", err.replace('"', "\"\""))
            } else {
                err
            });
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}
