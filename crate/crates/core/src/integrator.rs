//! Adaptive time stepping of the joint core + auxiliary system with event
//! detection.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AuxState, CoreState, DerivedObservables};
use crate::ode;
use crate::params::ModelParams;

/// Steady-state detection: the run is declared converged once every core
/// coordinate has varied by less than `tol` over the trailing `window` years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCheck {
    pub window: f64,
    pub tol: f64,
}

impl Default for ConvergenceCheck {
    fn default() -> Self {
        Self {
            window: 20.0,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub horizon: f64,
    pub blowup_threshold: f64,
    pub collapse_threshold: f64,
    /// `None` disables steady-state detection.
    pub convergence: Option<ConvergenceCheck>,
    pub max_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            initial_step: 1e-3,
            max_step: 0.5,
            min_step: 1e-12,
            horizon: 300.0,
            blowup_threshold: 1e6,
            collapse_threshold: 1e-6,
            convergence: Some(ConvergenceCheck::default()),
            max_steps: 10_000_000,
        }
    }
}

impl SolverSettings {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("horizon", self.horizon),
            ("blowup_threshold", self.blowup_threshold),
            ("collapse_threshold", self.collapse_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSettings(format!(
                    "{name} must be finite and > 0"
                )));
            }
        }
        if let Some(c) = self.convergence {
            if !(c.window > 0.0 && c.tol > 0.0 && c.window.is_finite() && c.tol.is_finite()) {
                return Err(Error::InvalidSettings(
                    "convergence window and tol must be finite and > 0".into(),
                ));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidSettings("max_steps must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    HorizonReached,
    ConvergedToEquilibrium,
    DebtBlowup,
    CollapseToZero,
    SingularState,
}

impl Termination {
    pub const ALL: [Termination; 5] = [
        Termination::HorizonReached,
        Termination::ConvergedToEquilibrium,
        Termination::DebtBlowup,
        Termination::CollapseToZero,
        Termination::SingularState,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::HorizonReached => "horizon_reached",
            Termination::ConvergedToEquilibrium => "converged_to_equilibrium",
            Termination::DebtBlowup => "debt_blowup",
            Termination::CollapseToZero => "collapse_to_zero",
            Termination::SingularState => "singular_state",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub core: CoreState,
    pub aux: AuxState,
    pub derived: DerivedObservables,
}

impl Sample {
    pub fn new(t: f64, core: CoreState, aux: AuxState, params: &ModelParams) -> Self {
        Self {
            t,
            core,
            aux,
            derived: DerivedObservables::compute(t, &core, &aux, params),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    /// Sum over accepted steps of the sup-norm local error estimate.
    pub accumulated_error: f64,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn end_time(&self) -> f64 {
        self.last().t
    }

    pub fn min_policy_rate(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.core.policy_rate)
            .fold(f64::INFINITY, f64::min)
    }

    /// Samples with `t >= t_from`.
    pub fn tail_from(&self, t_from: f64) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.t >= t_from)
    }
}

pub(crate) fn pack(core: &CoreState, aux: &AuxState) -> [f64; 8] {
    let c = core.to_array();
    let a = aux.to_array();
    [c[0], c[1], c[2], c[3], c[4], a[0], a[1], a[2]]
}

pub(crate) fn unpack(y: &[f64; 8]) -> (CoreState, AuxState) {
    (
        CoreState::from_array([y[0], y[1], y[2], y[3], y[4]]),
        AuxState::from_array([y[5], y[6], y[7]]),
    )
}

/// Right-hand side of the joint 8-dimensional system.
pub fn joint_rhs(params: &ModelParams, y: &[f64; 8]) -> Result<[f64; 8]> {
    let (core, aux) = unpack(y);
    let dc = params.core_rhs(&core)?;
    let da = params.aux_rhs(&core, &aux);
    Ok(pack(&dc, &da))
}

fn core_of(y: &[f64; 8]) -> [f64; 5] {
    [y[0], y[1], y[2], y[3], y[4]]
}

struct SteadyStateWindow {
    check: ConvergenceCheck,
    t_start: f64,
    buf: VecDeque<(f64, [f64; 5])>,
}

impl SteadyStateWindow {
    fn new(check: ConvergenceCheck, t0: f64, y0: [f64; 5]) -> Self {
        let mut buf = VecDeque::new();
        buf.push_back((t0, y0));
        Self {
            check,
            t_start: t0,
            buf,
        }
    }

    fn push(&mut self, t: f64, y: [f64; 5]) -> bool {
        self.buf.push_back((t, y));
        // keep the newest sample at or before t - window as the left edge
        while self.buf.len() > 2 && self.buf[1].0 <= t - self.check.window {
            self.buf.pop_front();
        }
        if t - self.t_start < self.check.window {
            return false;
        }
        (0..5).all(|i| {
            let (lo, hi) = self
                .buf
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| {
                    (lo.min(y[i]), hi.max(y[i]))
                });
            hi - lo < self.check.tol
        })
    }
}

fn detect_event(y: &[f64; 8], settings: &SolverSettings) -> Option<Termination> {
    if y.iter().any(|v| !v.is_finite()) || y[1] >= 1.0 {
        return Some(Termination::SingularState);
    }
    if y[2] > settings.blowup_threshold {
        return Some(Termination::DebtBlowup);
    }
    if y[0] < settings.collapse_threshold && y[1] < settings.collapse_threshold {
        return Some(Termination::CollapseToZero);
    }
    None
}

/// Integrates from `(core, aux)` at `t = 0` with Dormand–Prince 5(4) until an
/// event fires or the horizon is reached. Every accepted step is recorded.
pub fn integrate(
    core: CoreState,
    aux: AuxState,
    params: &ModelParams,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    params.validate()?;
    settings.validate()?;
    core.validate()?;
    aux.validate()?;

    let mut f = |y: &[f64; 8]| joint_rhs(params, y);
    let mut y = pack(&core, &aux);
    let mut t = 0.0;
    let mut samples = vec![Sample::new(t, core, aux, params)];
    let mut accumulated_error = 0.0;
    let mut rejected_steps = 0;

    let finish = |samples: Vec<Sample>, termination, accumulated_error, rejected_steps| {
        Ok(Trajectory {
            samples,
            termination,
            accumulated_error,
            rejected_steps,
        })
    };

    if let Some(ev) = detect_event(&y, settings) {
        return finish(samples, ev, accumulated_error, rejected_steps);
    }
    let mut dy = match f(&y) {
        Ok(d) => d,
        Err(Error::SingularState(_)) => {
            return finish(samples, Termination::SingularState, 0.0, 0);
        }
        Err(e) => return Err(e),
    };
    let mut window = settings
        .convergence
        .map(|c| SteadyStateWindow::new(c, t, core_of(&y)));
    let mut h = settings.initial_step.min(settings.max_step);
    let mut accepted = 0usize;

    while t < settings.horizon {
        if accepted + rejected_steps >= settings.max_steps {
            return finish(
                samples,
                Termination::SingularState,
                accumulated_error,
                rejected_steps,
            );
        }
        let remaining = settings.horizon - t;
        let last_step = h >= remaining;
        let step_h = if last_step { remaining } else { h };

        let (factor, accepted_step) = match ode::dopri5_step(&mut f, &y, &dy, step_h) {
            Ok(step) => {
                let norm =
                    ode::error_norm(&step.err, &y, &step.y, settings.rel_tol, settings.abs_tol);
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                if norm <= 1.0 && step.y.iter().all(|v| v.is_finite()) {
                    let local = step.err.iter().map(|e| e.abs()).fold(0.0, f64::max);
                    (factor, Some((step, local)))
                } else {
                    (factor.min(0.5), None)
                }
            }
            // A stage left the domain (employment >= 1); retry with a shorter step.
            Err(Error::SingularState(_)) | Err(Error::InvalidState(_)) => (0.25, None),
            Err(e) => return Err(e),
        };

        match accepted_step {
            Some((step, local)) => {
                t = if last_step {
                    settings.horizon
                } else {
                    t + step_h
                };
                y = step.y;
                dy = step.dy;
                accumulated_error += local;
                accepted += 1;
                let (c, a) = unpack(&y);
                samples.push(Sample::new(t, c, a, params));
                if let Some(ev) = detect_event(&y, settings) {
                    return finish(samples, ev, accumulated_error, rejected_steps);
                }
                if let Some(w) = window.as_mut() {
                    if w.push(t, core_of(&y)) {
                        return finish(
                            samples,
                            Termination::ConvergedToEquilibrium,
                            accumulated_error,
                            rejected_steps,
                        );
                    }
                }
                h = (step_h * factor).min(settings.max_step);
            }
            None => {
                rejected_steps += 1;
                h = step_h * factor;
                if h < settings.min_step {
                    return finish(
                        samples,
                        Termination::SingularState,
                        accumulated_error,
                        rejected_steps,
                    );
                }
            }
        }
    }
    finish(
        samples,
        Termination::HorizonReached,
        accumulated_error,
        rejected_steps,
    )
}

/// Outcome of the fixed-step order study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    /// `log2(e(h)/e(h/2))` for each halving, coarsest first.
    pub orders: Vec<f64>,
    /// Order measured at the finest pair of step sizes.
    pub measured: f64,
}

/// Measures the convergence order of fixed-step RK4 on the core system over
/// `[0, t_end]`, against a tight-tolerance adaptive reference run.
pub fn convergence_order_check(
    params: &ModelParams,
    initial: CoreState,
    t_end: f64,
) -> Result<OrderReport> {
    params.validate()?;
    initial.validate()?;
    let mut f = |y: &[f64; 5]| {
        params
            .core_rhs(&CoreState::from_array(*y))
            .map(|d| d.to_array())
    };
    let reference = adaptive_core_reference(params, initial, t_end)?;
    let orders = ode::measured_orders(&mut f, initial.to_array(), t_end, &reference, 640, 2)?;
    let measured = *orders.last().expect("at least one halving");
    Ok(OrderReport { orders, measured })
}

fn adaptive_core_reference(
    params: &ModelParams,
    initial: CoreState,
    t_end: f64,
) -> Result<[f64; 5]> {
    let settings = SolverSettings {
        rel_tol: 1e-13,
        abs_tol: 1e-15,
        max_step: 0.05,
        horizon: t_end,
        convergence: None,
        ..SolverSettings::default()
    };
    let traj = integrate(initial, AuxState::initial(0.0), params, &settings)?;
    if traj.termination != Termination::HorizonReached {
        return Err(Error::InvalidState(format!(
            "reference run terminated early: {}",
            traj.termination
        )));
    }
    Ok(traj.last().core.to_array())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> (CoreState, AuxState, ModelParams) {
        (
            CoreState::new(0.8, 0.9, 0.6, 0.0, 0.0),
            AuxState::initial(0.0),
            ModelParams::fixed_rate(0.03),
        )
    }

    #[test]
    fn first_sample_is_initial_and_times_increase() {
        let (c, a, p) = fig2();
        let traj = integrate(c, a, &p, &SolverSettings::with_horizon(50.0)).unwrap();
        assert_eq!(traj.first().t, 0.0);
        assert_eq!(traj.first().core, c);
        assert_eq!(traj.first().aux, a);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.termination, Termination::HorizonReached);
        assert_eq!(traj.end_time(), 50.0);
    }

    #[test]
    fn deterministic() {
        let (c, a, p) = fig2();
        let s = SolverSettings::with_horizon(100.0);
        let t1 = integrate(c, a, &p, &s).unwrap();
        let t2 = integrate(c, a, &p, &s).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn blowup_fires_iff_threshold_exceeded() {
        let (mut c, a, p) = fig2();
        c.private_debt_ratio = 6.0;
        let s = SolverSettings::with_horizon(150.0);
        let traj = integrate(c, a, &p, &s).unwrap();
        assert_eq!(traj.termination, Termination::DebtBlowup);
        let n = traj.samples.len();
        assert!(traj.last().core.private_debt_ratio > s.blowup_threshold);
        assert!(traj.samples[..n - 1]
            .iter()
            .all(|x| x.core.private_debt_ratio <= s.blowup_threshold));

        // raising the threshold postpones the event
        let s2 = SolverSettings {
            blowup_threshold: 1e8,
            ..s.clone()
        };
        let traj2 = integrate(c, a, &p, &s2).unwrap();
        assert_eq!(traj2.termination, Termination::DebtBlowup);
        assert!(traj2.end_time() > traj.end_time());
    }

    #[test]
    fn collapse_fires_when_both_below_threshold() {
        let (_, a, p) = fig2();
        let c = CoreState::new(1e-7, 1e-7, 0.5, 0.0, 0.0);
        let traj = integrate(c, a, &p, &SolverSettings::default()).unwrap();
        assert_eq!(traj.termination, Termination::CollapseToZero);
        assert_eq!(traj.samples.len(), 1);

        // only one of the two below threshold: no collapse
        let c = CoreState::new(1e-7, 0.5, 27.5, 0.0, 0.0);
        let s = SolverSettings {
            convergence: None,
            ..SolverSettings::with_horizon(1.0)
        };
        let traj = integrate(c, a, &p, &s).unwrap();
        assert_eq!(traj.termination, Termination::HorizonReached);
    }

    #[test]
    fn employment_axis_stays_invariant() {
        let (_, a, p) = fig2();
        let c = CoreState::new(0.8, 0.0, 0.6, 0.0, 0.0);
        let s = SolverSettings {
            convergence: None,
            ..SolverSettings::with_horizon(100.0)
        };
        let traj = integrate(c, a, &p, &s).unwrap();
        assert!(traj
            .samples
            .iter()
            .all(|x| x.core.employment.abs() <= 1e-12));
    }

    #[test]
    fn tighter_tolerance_changes_less_than_error_estimate() {
        let (c, a, p) = fig2();
        let loose = SolverSettings {
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            convergence: None,
            ..SolverSettings::with_horizon(60.0)
        };
        let tight = SolverSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            ..loose.clone()
        };
        let tl = integrate(c, a, &p, &loose).unwrap();
        let tt = integrate(c, a, &p, &tight).unwrap();
        let diff = tl.last().core.distance(&tt.last().core);
        assert!(
            diff < tl.accumulated_error,
            "diff {diff} vs estimate {}",
            tl.accumulated_error
        );
    }

    #[test]
    fn invalid_inputs_rejected() {
        let (c, a, p) = fig2();
        let bad = SolverSettings {
            rel_tol: 0.0,
            ..SolverSettings::default()
        };
        assert!(matches!(
            integrate(c, a, &p, &bad),
            Err(Error::InvalidSettings(_))
        ));
        let mut c2 = c;
        c2.employment = 1.0;
        assert!(matches!(
            integrate(c2, a, &p, &SolverSettings::default()),
            Err(Error::InvalidState(_))
        ));
        assert!(integrate(
            c,
            AuxState::new(0.0, -1.0, 100.0),
            &p,
            &SolverSettings::default()
        )
        .is_err());
    }

    #[test]
    fn step_underflow_is_singular_termination() {
        // employment pushed towards one by explosive growth; the Phillips pole
        // forces step rejection until the minimum step is hit
        let p = ModelParams {
            inv_shift: 2.0,
            ..ModelParams::fixed_rate(0.03)
        };
        let c = CoreState::new(0.8, 0.99, 0.6, 0.0, 0.0);
        let s = SolverSettings {
            min_step: 1e-6,
            ..SolverSettings::with_horizon(50.0)
        };
        let traj = integrate(c, AuxState::initial(0.0), &p, &s).unwrap();
        assert_eq!(traj.termination, Termination::SingularState);
    }

    #[test]
    fn rk4_order_on_fig2() {
        let (c, _, p) = fig2();
        let report = convergence_order_check(&p, c, 10.0).unwrap();
        assert!(
            (3.7..=4.3).contains(&report.measured),
            "orders {:?}",
            report.orders
        );
    }

    #[test]
    fn termination_names_roundtrip() {
        for t in Termination::ALL {
            assert_eq!(Termination::parse(t.as_str()), Some(t));
        }
        assert_eq!(Termination::parse("nope"), None);
    }
}
