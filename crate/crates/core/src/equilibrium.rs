//! Interior equilibrium and its local stability.
//!
//! Profit share is pinned by `kappa(pi) = nu (alpha + beta + delta)`. The wage
//! share and the private debt ratio are then mutually implicit through
//! inflation, so the wage share is found by bracketed root-finding on
//! `(0, 1)`. The target and policy rates form a one-parameter family of
//! equilibria (`rho = r_g`); the policy rate is an input.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::CoreState;
use crate::params::{ModelParams, PolicyMode};

/// Real parts smaller than this in magnitude are treated as zero.
pub const MARGINAL_TOL: f64 = 1e-7;

const ROOT_TOL: f64 = 1e-12;
const SCAN_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    LocallyStable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub classification: Stability,
    /// All five eigenvalues, sorted by decreasing real part.
    pub eigenvalues: Vec<Eigenvalue>,
    /// Eigenvalues that remain after removing the zero eigenvalues owed to
    /// the equilibrium continuum; these decide the classification.
    pub transverse: Vec<Eigenvalue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub pi_bar: f64,
    pub omega_bar: f64,
    pub lambda_bar: f64,
    pub ell_bar: f64,
    pub rho_bar: f64,
    pub r_g_bar: f64,
    pub b_bar: f64,
    pub jacobian: [[f64; 5]; 5],
    pub eigenvalues: Vec<Eigenvalue>,
    pub classification: Stability,
}

impl Equilibrium {
    pub fn core(&self) -> CoreState {
        CoreState::new(
            self.omega_bar,
            self.lambda_bar,
            self.ell_bar,
            self.rho_bar,
            self.r_g_bar,
        )
    }

    /// Sup-norm of the core right-hand side at the equilibrium point.
    pub fn residual(&self, params: &ModelParams) -> Result<f64> {
        let d = params.core_rhs(&self.core())?;
        Ok(d.to_array().iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

/// Equilibrium profit share `kappa^{-1}(nu (alpha + beta + delta))`.
pub fn equilibrium_profit_share(params: &ModelParams) -> Result<f64> {
    let target = params.capital_output * (params.natural_growth() + params.depreciation);
    params
        .investment_inverse(target)
        .map_err(|e| Error::NoInteriorEquilibrium(e.to_string()))
}

/// Lending rate at an equilibrium with policy rate `r_g_bar`.
fn equilibrium_lending_rate(params: &ModelParams, r_g_bar: f64) -> f64 {
    match params.policy_mode {
        PolicyMode::ActiveRule => r_g_bar + params.loan_spread,
        PolicyMode::FixedRate { rate } => rate,
    }
}

struct WageShareEquation<'a> {
    params: &'a ModelParams,
    pi_bar: f64,
    lending_rate: f64,
}

impl WageShareEquation<'_> {
    fn growth_plus_inflation(&self, omega: f64) -> f64 {
        self.params.natural_growth() + self.params.inflation(omega)
    }

    fn debt_ratio(&self, omega: f64) -> f64 {
        (self.params.investment(self.pi_bar) - self.pi_bar) / self.growth_plus_inflation(omega)
    }

    fn residual(&self, omega: f64) -> f64 {
        omega
            - (1.0
                - self.pi_bar
                - self.params.tax_share
                - self.lending_rate * self.debt_ratio(omega))
    }

    /// Sub-interval of `(0, 1)` on which `alpha + beta + i(omega) > 0`.
    fn domain(&self) -> Option<(f64, f64)> {
        let p = self.params;
        let lo = if p.inflation_relax > 0.0 {
            // zero of alpha + beta + eta_p (m omega - 1)
            (1.0 - p.natural_growth() / p.inflation_relax) / p.markup
        } else if p.natural_growth() > 0.0 {
            f64::NEG_INFINITY
        } else {
            return None;
        };
        let lo = lo.max(0.0);
        (lo < 1.0).then_some((lo, 1.0))
    }

    fn roots(&self) -> Vec<f64> {
        let Some((lo, hi)) = self.domain() else {
            return Vec::new();
        };
        // open interval: stay clear of the pole of the debt ratio
        let span = hi - lo;
        let grid: Vec<f64> = (0..=SCAN_POINTS)
            .map(|k| lo + span * (k as f64 + 0.5) / (SCAN_POINTS as f64 + 1.0))
            .collect();
        let mut roots = Vec::new();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.residual(a), self.residual(b));
            if fa == 0.0 {
                roots.push(a);
            } else if fa.signum() != fb.signum() && fb != 0.0 {
                roots.push(self.bisect(a, b, fa));
            }
        }
        roots
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if b - a <= ROOT_TOL * m.abs().max(1.0) * 0.5 {
                return m;
            }
            let fm = self.residual(m);
            if fm == 0.0 {
                return m;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Every interior equilibrium for policy rate `r_g_bar`, ordered by
/// decreasing wage share.
pub fn interior_equilibria(params: &ModelParams, r_g_bar: f64) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    let pi_bar = equilibrium_profit_share(params)?;
    let eqn = WageShareEquation {
        params,
        pi_bar,
        lending_rate: equilibrium_lending_rate(params, r_g_bar),
    };
    if eqn.domain().is_none() {
        return Err(Error::DegenerateEquilibrium(
            params.natural_growth() + params.inflation(1.0),
        ));
    }
    let mut roots = eqn.roots();
    roots.sort_by(|a, b| b.total_cmp(a));

    let mut out = Vec::with_capacity(roots.len());
    for omega in roots {
        let denom = eqn.growth_plus_inflation(omega);
        if denom <= 0.0 {
            return Err(Error::DegenerateEquilibrium(denom));
        }
        let wage_growth =
            params.productivity_growth + (1.0 - params.money_illusion) * params.inflation(omega);
        let lambda_bar = match params.phillips_inverse(wage_growth) {
            Ok(l) if (0.0..1.0).contains(&l) => l,
            _ => continue,
        };
        let b_denom = params.inflation(omega) + params.natural_growth() - r_g_bar;
        if b_denom.abs() < 1e-14 {
            return Err(Error::GovDebtUndefined(b_denom));
        }
        let core = CoreState::new(omega, lambda_bar, eqn.debt_ratio(omega), r_g_bar, r_g_bar);
        let report = classify_stability(&core, params)?;
        let jac = jacobian(params, &core)?;
        out.push(Equilibrium {
            pi_bar,
            omega_bar: omega,
            lambda_bar,
            ell_bar: core.private_debt_ratio,
            rho_bar: r_g_bar,
            r_g_bar,
            b_bar: (params.gov_spend_share - params.tax_share) / b_denom,
            jacobian: to_rows(&jac),
            eigenvalues: report.eigenvalues,
            classification: report.classification,
        });
    }
    Ok(out)
}

/// The interior equilibrium with the highest wage share (lowest debt ratio).
pub fn solve_interior_equilibrium(params: &ModelParams, r_g_bar: f64) -> Result<Equilibrium> {
    interior_equilibria(params, r_g_bar)?
        .into_iter()
        .next()
        .ok_or_else(|| {
            Error::NoInteriorEquilibrium(format!(
                "no sign change of the wage-share equation on (0, 1) for r_g = {r_g_bar}"
            ))
        })
}

/// Central-difference Jacobian of the core system, step `1e-6 (1 + |x_j|)`.
pub fn jacobian(params: &ModelParams, at: &CoreState) -> Result<Matrix5<f64>> {
    jacobian_with_step(params, at, 1e-6)
}

pub fn jacobian_with_step(
    params: &ModelParams,
    at: &CoreState,
    rel_step: f64,
) -> Result<Matrix5<f64>> {
    let x = at.to_array();
    let mut jac = Matrix5::zeros();
    for j in 0..5 {
        let h = rel_step * (1.0 + x[j].abs());
        let mut plus = x;
        let mut minus = x;
        plus[j] += h;
        minus[j] -= h;
        let fp = params.core_rhs(&CoreState::from_array(plus))?.to_array();
        let fm = params.core_rhs(&CoreState::from_array(minus))?.to_array();
        let col = Vector5::from_iterator((0..5).map(|i| (fp[i] - fm[i]) / (2.0 * h)));
        jac.set_column(j, &col);
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("non-finite Jacobian entry".into()));
    }
    Ok(jac)
}

fn to_rows(m: &Matrix5<f64>) -> [[f64; 5]; 5] {
    let mut rows = [[0.0; 5]; 5];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    rows
}

pub fn eigenvalues(m: &Matrix5<f64>) -> Vec<Eigenvalue> {
    let mut ev: Vec<Eigenvalue> = m
        .complex_eigenvalues()
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

/// Dimension of the equilibrium set through any interior point: the frozen
/// rate coordinates when the rule is inactive, otherwise the `rho = r_g`
/// family.
pub fn continuum_dimension(params: &ModelParams) -> usize {
    match params.policy_mode {
        PolicyMode::FixedRate { .. } => 2,
        PolicyMode::ActiveRule if params.rate_adjust_speed == 0.0 => 2,
        PolicyMode::ActiveRule => 1,
    }
}

/// Classifies an equilibrium by the largest real part among the eigenvalues
/// transverse to the equilibrium continuum.
pub fn classify_stability(at: &CoreState, params: &ModelParams) -> Result<StabilityReport> {
    let jac = jacobian(params, at)?;
    let eigenvalues = eigenvalues(&jac);

    let mut by_modulus: Vec<Eigenvalue> = eigenvalues.clone();
    by_modulus.sort_by(|a, b| a.re.hypot(a.im).total_cmp(&b.re.hypot(b.im)));
    let mut transverse: Vec<Eigenvalue> = by_modulus
        .into_iter()
        .skip(continuum_dimension(params))
        .collect();
    transverse.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

    let max_re = transverse
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let classification = if max_re.abs() < MARGINAL_TOL {
        Stability::Marginal
    } else if max_re < 0.0 {
        Stability::LocallyStable
    } else {
        Stability::Unstable
    };
    Ok(StabilityReport {
        classification,
        eigenvalues,
        transverse,
    })
}

/// Policy rate realised by a converged run: the mean over samples in the
/// trailing `window` years.
pub fn realized_policy_rate(traj: &Trajectory, window: f64) -> f64 {
    let t_from = traj.end_time() - window;
    let (sum, n) = traj
        .tail_from(t_from)
        .fold((0.0, 0usize), |(s, n), x| (s + x.core.policy_rate, n + 1));
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, SolverSettings, Termination};
    use crate::model::AuxState;
    use approx::assert_relative_eq;

    fn active() -> ModelParams {
        ModelParams::with_policy(0.2, 0.0, 0.03, 0.1, 0.2)
    }

    /// Independent route: fixed-point iteration on omega.
    fn fixed_point_omega(params: &ModelParams, lending: f64) -> f64 {
        let a = params.capital_output
            * (params.productivity_growth + params.labor_growth + params.depreciation);
        let pi = ((a - params.inv_const).ln() - params.inv_shift) / params.inv_slope;
        let kappa = a;
        let mut omega = 0.9;
        for _ in 0..10_000 {
            let infl = params.inflation_relax * (params.markup * omega - 1.0);
            let ell = (kappa - pi) / (params.productivity_growth + params.labor_growth + infl);
            let next = 1.0 - pi - params.tax_share - lending * ell;
            if (next - omega).abs() < 1e-15 {
                return next;
            }
            omega = next;
        }
        omega
    }

    #[test]
    fn profit_share_matches_closed_form() {
        let p = ModelParams::default();
        let pi = equilibrium_profit_share(&p).unwrap();
        assert_relative_eq!(pi, ((0.2315f64).ln() + 5.0) / 20.0, max_relative = 1e-13);
    }

    #[test]
    fn fixed_rate_equilibrium_is_fixed_point() {
        let p = ModelParams::fixed_rate(0.03);
        let eq = solve_interior_equilibrium(&p, 0.0).unwrap();
        assert!(eq.residual(&p).unwrap() < 1e-10);
        let omega = fixed_point_omega(&p, 0.03);
        assert!(
            (eq.omega_bar - omega).abs() < 1e-11,
            "{} vs {}",
            eq.omega_bar,
            omega
        );
        assert_eq!(eq.b_bar, 0.0);
        assert_eq!(eq.classification, Stability::LocallyStable);
    }

    #[test]
    fn active_rule_family() {
        let p = active();
        for r_g in [-0.02, 0.0, 0.01315, 0.02] {
            let eq = solve_interior_equilibrium(&p, r_g).unwrap();
            assert_eq!(eq.rho_bar, r_g);
            assert_eq!(eq.r_g_bar, r_g);
            let d = p.core_rhs(&eq.core()).unwrap();
            assert_eq!(d.policy_rate, 0.0);
            assert!(d.target_rate.abs() < 1e-12);
            assert!(eq.residual(&p).unwrap() < 1e-10);
            // b_bar zeroes the government debt ratio equation
            let aux = AuxState::initial(eq.b_bar);
            assert!(p.aux_rhs(&eq.core(), &aux).gov_debt_ratio.abs() < 1e-12);
        }
    }

    #[test]
    fn full_indexation_pins_employment() {
        let p = ModelParams {
            money_illusion: 1.0,
            ..ModelParams::fixed_rate(0.03)
        };
        let eq = solve_interior_equilibrium(&p, 0.0).unwrap();
        assert_relative_eq!(
            eq.lambda_bar,
            p.phillips_inverse(p.productivity_growth).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn second_root_with_higher_debt() {
        let p = ModelParams::fixed_rate(0.03);
        let all = interior_equilibria(&p, 0.0).unwrap();
        assert!(all.len() >= 2);
        assert!(all[0].omega_bar > all[1].omega_bar);
        assert!(all[0].ell_bar < all[1].ell_bar);
        for eq in &all {
            assert!(eq.residual(&p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn error_paths() {
        let p = ModelParams {
            inv_const: 0.5,
            ..ModelParams::fixed_rate(0.03)
        };
        assert!(matches!(
            solve_interior_equilibrium(&p, 0.0),
            Err(Error::NoInteriorEquilibrium(_))
        ));

        let p = ModelParams {
            productivity_growth: 0.0,
            labor_growth: 0.0,
            inflation_relax: 0.0,
            ..ModelParams::fixed_rate(0.03)
        };
        assert!(matches!(
            solve_interior_equilibrium(&p, 0.0),
            Err(Error::DegenerateEquilibrium(_))
        ));

        // choose r_g so that i(omega_bar) + alpha + beta - r_g = 0
        let p = ModelParams::fixed_rate(0.0);
        let eq = solve_interior_equilibrium(&p, 0.0).unwrap();
        let r_g = p.inflation(eq.omega_bar) + p.natural_growth();
        assert!(matches!(
            solve_interior_equilibrium(&p, r_g),
            Err(Error::GovDebtUndefined(_))
        ));
    }

    #[test]
    fn jacobian_is_richardson_consistent() {
        let p = active();
        let eq = solve_interior_equilibrium(&p, 0.01315).unwrap();
        let x = eq.core().to_array();
        // oracle: plain central differences at h and h/2, extrapolated
        let f = |y: [f64; 5]| p.core_rhs(&CoreState::from_array(y)).unwrap().to_array();
        let fd = |h: f64| {
            let mut m = [[0.0; 5]; 5];
            for j in 0..5 {
                let (mut a, mut b) = (x, x);
                a[j] += h;
                b[j] -= h;
                let (fa, fb) = (f(a), f(b));
                for i in 0..5 {
                    m[i][j] = (fa[i] - fb[i]) / (2.0 * h);
                }
            }
            m
        };
        let (c, f2) = (fd(1e-3), fd(5e-4));
        for i in 0..5 {
            for j in 0..5 {
                let extrapolated = (4.0 * f2[i][j] - c[i][j]) / 3.0;
                assert!(
                    (eq.jacobian[i][j] - extrapolated).abs() < 1e-6,
                    "({i},{j}) {} vs {}",
                    eq.jacobian[i][j],
                    extrapolated
                );
            }
        }
    }

    #[test]
    fn fixed_rate_spectrum_is_subsystem_plus_zeros() {
        let p = ModelParams::fixed_rate(0.03);
        let eq = solve_interior_equilibrium(&p, 0.0).unwrap();
        for i in 0..5 {
            for j in 3..5 {
                assert_eq!(eq.jacobian[i][j], 0.0);
                assert_eq!(eq.jacobian[j][i], 0.0);
            }
        }
        let sub = nalgebra::Matrix3::from_fn(|i, j| eq.jacobian[i][j]);
        let mut sub_ev: Vec<_> = sub
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect();
        sub_ev.push((0.0, 0.0));
        sub_ev.push((0.0, 0.0));
        sub_ev.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        for (e, s) in eq.eigenvalues.iter().zip(&sub_ev) {
            assert!((e.re - s.0).abs() < 1e-10 && (e.im - s.1).abs() < 1e-10);
        }
    }

    #[test]
    fn stability_agrees_with_perturbed_integration() {
        for p in [ModelParams::fixed_rate(0.03), active()] {
            let eq = solve_interior_equilibrium(&p, 0.01315).unwrap();
            assert_eq!(eq.classification, Stability::LocallyStable);
            let mut start = eq.core();
            start.wage_share += 1e-4;
            start.private_debt_ratio -= 1e-4;
            let traj = integrate(
                start,
                AuxState::initial(eq.b_bar),
                &p,
                &SolverSettings::with_horizon(400.0),
            )
            .unwrap();
            assert_eq!(traj.termination, Termination::ConvergedToEquilibrium);
        }
    }

    #[test]
    fn unstable_equilibrium_is_left() {
        // the high-debt root is a saddle
        let p = ModelParams::fixed_rate(0.03);
        let all = interior_equilibria(&p, 0.0).unwrap();
        let eq = &all[1];
        assert_eq!(eq.classification, Stability::Unstable);
        let mut start = eq.core();
        start.private_debt_ratio += 1e-4;
        let traj = integrate(
            start,
            AuxState::initial(0.0),
            &p,
            &SolverSettings::with_horizon(300.0),
        )
        .unwrap();
        let max_dev = traj
            .samples
            .iter()
            .map(|s| s.core.distance(&eq.core()))
            .fold(0.0, f64::max);
        assert!(max_dev > 1e-2);
        assert!(traj.last().core.distance(&eq.core()) > 1e-4);
    }
}
