//! Balance sheet, transaction and flow-of-funds matrix reconstructed from the
//! state, and the stock-flow consistency audit built on it.
//!
//! Two independent routes meet in every snapshot. Financial balances come from
//! behavioural definitions (profits, the government budget constraint, bank
//! retained earnings), while the flow-of-funds rows come from differentiating
//! the levels `Lambda = ell p Y` and `B = b p Y` along the ODE right-hand side.
//! The audit checks that the two agree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{AuxState, CoreState};
use crate::params::ModelParams;

/// Residuals above this (relative to the largest term) fail the audit.
pub const AUDIT_TOL: f64 = 1e-8;

/// Columns of the transactions matrix. Balance-sheet and flow-of-funds rows
/// merge the two firm columns into `FirmsCurrent`.
pub const COLUMNS: [&str; 5] = [
    "households",
    "firms_current",
    "firms_capital",
    "banks",
    "public",
];
const H: usize = 0;
const FC: usize = 1;
const FK: usize = 2;
const B: usize = 3;
const G: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub entries: [f64; 5],
}

impl Row {
    fn new(name: &str, entries: [f64; 5]) -> Self {
        Self {
            name: name.to_string(),
            entries,
        }
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// Sector net worths as stated by the model (banks hold exactly the
/// regulatory capital `k_r Lambda`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetWorth {
    pub households: f64,
    pub firms: f64,
    pub banks: f64,
    pub public: f64,
    pub total: f64,
}

/// Financial balances from their defining expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinancialBalances {
    pub households: f64,
    pub firms: f64,
    /// `-p (I - delta K)`
    pub firms_capital: f64,
    pub banks: f64,
    pub public: f64,
}

impl FinancialBalances {
    fn as_row(&self) -> [f64; 5] {
        [
            self.households,
            self.firms,
            self.firms_capital,
            self.banks,
            self.public,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub t: f64,
    pub nominal_output: f64,
    pub capital_ratio_banks: f64,
    pub balance_sheet: Vec<Row>,
    pub net_worth: NetWorth,
    pub transactions: Vec<Row>,
    pub financial_balances: FinancialBalances,
    pub flow_of_funds: Vec<Row>,
    /// `dp/dt K`, the revaluation term in the firms' change in net worth.
    pub capital_revaluation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
    pub scale: f64,
}

impl IdentityCheck {
    fn new(name: impl Into<String>, terms: &[f64]) -> Self {
        let residual: f64 = terms.iter().sum();
        let scale = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self {
            name: name.into(),
            residual,
            scale,
        }
    }

    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.scale
        }
    }
}

/// Derivatives of the state used by the ledger.
#[derive(Debug, Clone, Copy)]
pub struct StateRates {
    pub core: CoreState,
    pub aux: AuxState,
}

impl StateRates {
    pub fn compute(core: &CoreState, aux: &AuxState, params: &ModelParams) -> Result<Self> {
        Ok(Self {
            core: params.core_rhs(core)?,
            aux: params.aux_rhs(core, aux),
        })
    }
}

/// Snapshot at time `t`, with derivatives evaluated from the model.
pub fn build_snapshot(
    t: f64,
    core: &CoreState,
    aux: &AuxState,
    params: &ModelParams,
) -> Result<LedgerSnapshot> {
    let rates = StateRates::compute(core, aux, params)?;
    build_snapshot_with(t, core, aux, &rates, params)
}

pub fn build_snapshot_with(
    t: f64,
    core: &CoreState,
    aux: &AuxState,
    rates: &StateRates,
    params: &ModelParams,
) -> Result<LedgerSnapshot> {
    if !(aux.price_level > 0.0 && aux.real_output > 0.0) {
        return Err(Error::InvalidState(
            "ledger requires price level and real output > 0".into(),
        ));
    }
    let p = aux.price_level;
    let y = aux.real_output;
    let py = p * y;
    let k_r = params.capital_ratio_banks;

    // levels
    let capital = params.capital_output * y;
    let loans = core.private_debt_ratio * py;
    let deposits = (1.0 - k_r) * loans;
    let bills = aux.gov_debt_ratio * py;
    let pk = p * capital;

    // flows
    let profit_share = params.profit_share(core);
    let kappa = params.investment(profit_share);
    let lending = params.lending_rate(core);
    let deposit_rate = params.deposit_rate(core);
    let policy = core.policy_rate;
    let investment = p * kappa * y;
    let gov_spending = p * params.gov_spend_share * y;
    let taxes = p * params.tax_share * y;
    let wages = core.wage_share * py;
    let depreciation = p * params.depreciation * capital;
    let consumption = py - investment - gov_spending;
    let int_deposits = deposit_rate * deposits;
    let int_loans = lending * loans;
    let int_bills = policy * bills;

    // level derivatives along the state
    let inflation = params.inflation(core.wage_share);
    let output_growth = rates.aux.real_output / y;
    let d_py = py * (inflation + output_growth);
    let d_loans = rates.core.private_debt_ratio * py + core.private_debt_ratio * d_py;
    let d_bills = rates.aux.gov_debt_ratio * py + aux.gov_debt_ratio * d_py;
    let d_deposits = (1.0 - k_r) * d_loans;
    let d_price = rates.aux.price_level;

    let bank_saving = k_r * d_loans;
    let dividends = int_loans - int_deposits - bank_saving;

    let balances = FinancialBalances {
        households: wages + int_deposits + int_bills + dividends - consumption,
        firms: py - wages - taxes - int_loans - depreciation,
        firms_capital: -(investment - depreciation),
        banks: bank_saving,
        public: taxes - gov_spending - int_bills,
    };

    let balance_sheet = vec![
        Row::new("capital_stock", [0.0, pk, 0.0, 0.0, 0.0]),
        Row::new("deposits", [deposits, 0.0, 0.0, -deposits, 0.0]),
        Row::new("loans", [0.0, -loans, 0.0, loans, 0.0]),
        Row::new("bills", [bills, 0.0, 0.0, 0.0, -bills]),
    ];
    let net_worth = NetWorth {
        households: deposits + bills,
        firms: pk - loans,
        banks: k_r * loans,
        public: -bills,
        total: pk,
    };

    let transactions = vec![
        Row::new("consumption", [-consumption, consumption, 0.0, 0.0, 0.0]),
        Row::new("gov_spending", [0.0, gov_spending, 0.0, 0.0, -gov_spending]),
        Row::new("investment", [0.0, investment, -investment, 0.0, 0.0]),
        Row::new("wages", [wages, -wages, 0.0, 0.0, 0.0]),
        Row::new("taxes", [0.0, -taxes, 0.0, 0.0, taxes]),
        Row::new("depreciation", [0.0, -depreciation, depreciation, 0.0, 0.0]),
        Row::new(
            "interest_deposits",
            [int_deposits, 0.0, 0.0, -int_deposits, 0.0],
        ),
        Row::new("interest_loans", [0.0, -int_loans, 0.0, int_loans, 0.0]),
        Row::new("interest_bills", [int_bills, 0.0, 0.0, 0.0, -int_bills]),
        Row::new("dividends", [dividends, 0.0, 0.0, -dividends, 0.0]),
    ];

    let net_investment = investment - depreciation;
    let flow_of_funds = vec![
        Row::new("change_in_capital", [0.0, net_investment, 0.0, 0.0, 0.0]),
        Row::new(
            "change_in_deposits",
            [d_deposits, 0.0, 0.0, -d_deposits, 0.0],
        ),
        Row::new("change_in_loans", [0.0, -d_loans, 0.0, d_loans, 0.0]),
        Row::new("change_in_bills", [d_bills, 0.0, 0.0, 0.0, -d_bills]),
    ];

    Ok(LedgerSnapshot {
        t,
        nominal_output: py,
        capital_ratio_banks: k_r,
        balance_sheet,
        net_worth,
        transactions,
        financial_balances: balances,
        flow_of_funds,
        capital_revaluation: d_price * capital,
    })
}

impl LedgerSnapshot {
    fn row<'a>(rows: &'a [Row], name: &str) -> &'a Row {
        rows.iter()
            .find(|r| r.name == name)
            .expect("snapshot rows are fixed at construction")
    }

    pub fn transaction(&self, name: &str) -> &Row {
        Self::row(&self.transactions, name)
    }

    pub fn transaction_mut(&mut self, name: &str) -> Option<&mut Row> {
        self.transactions.iter_mut().find(|r| r.name == name)
    }

    /// Evaluates every accounting identity of the matrix. Each check lists its
    /// terms so that the residual is their sum.
    pub fn checks(&self) -> Vec<IdentityCheck> {
        let mut out = Vec::new();
        let bal = self.financial_balances.as_row();

        for row in &self.transactions {
            out.push(IdentityCheck::new(
                format!("transactions.{}", row.name),
                &row.entries,
            ));
        }
        for (col, name) in COLUMNS.iter().enumerate() {
            let mut terms: Vec<f64> = self.transactions.iter().map(|r| r.entries[col]).collect();
            terms.push(-bal[col]);
            out.push(IdentityCheck::new(
                format!("transactions_column.{name}"),
                &terms,
            ));
        }
        out.push(IdentityCheck::new("financial_balances.sum", &bal));

        for row in &self.balance_sheet {
            let mut terms = row.entries.to_vec();
            if row.name == "capital_stock" {
                terms.push(-self.net_worth.total);
            }
            out.push(IdentityCheck::new(
                format!("balance_sheet.{}", row.name),
                &terms,
            ));
        }
        let nw = &self.net_worth;
        for (name, col, stated) in [
            ("households", H, nw.households),
            ("firms", FC, nw.firms),
            ("banks", B, nw.banks),
            ("public", G, nw.public),
        ] {
            let mut terms: Vec<f64> = self.balance_sheet.iter().map(|r| r.entries[col]).collect();
            terms.push(-stated);
            out.push(IdentityCheck::new(format!("net_worth.{name}"), &terms));
        }
        out.push(IdentityCheck::new(
            "net_worth.total",
            &[nw.households, nw.firms, nw.banks, nw.public, -nw.total],
        ));

        // flow of funds against financial balances
        let fof = &self.flow_of_funds;
        let mut household_terms: Vec<f64> = fof.iter().map(|r| r.entries[H]).collect();
        household_terms.push(-bal[H]);
        out.push(IdentityCheck::new(
            "flow_of_funds.households",
            &household_terms,
        ));
        let mut firm_terms: Vec<f64> = fof.iter().map(|r| r.entries[FC] + r.entries[FK]).collect();
        firm_terms.push(-bal[FC]);
        out.push(IdentityCheck::new("flow_of_funds.firms", &firm_terms));
        let mut bank_terms: Vec<f64> = fof.iter().map(|r| r.entries[B]).collect();
        bank_terms.push(-bal[B]);
        out.push(IdentityCheck::new("flow_of_funds.banks", &bank_terms));
        let mut public_terms: Vec<f64> = fof.iter().map(|r| r.entries[G]).collect();
        public_terms.push(-bal[G]);
        out.push(IdentityCheck::new("flow_of_funds.public", &public_terms));
        for row in fof.iter().filter(|r| r.name != "change_in_capital") {
            out.push(IdentityCheck::new(
                format!("flow_of_funds.{}", row.name),
                &row.entries,
            ));
        }
        let net_investment = Self::row(fof, "change_in_capital").entries[FC];
        out.push(IdentityCheck::new(
            "flow_of_funds.capital",
            &[net_investment, bal[FK]],
        ));

        // regulatory capital: S_b = k_r dLambda and dDelta = (1 - k_r) dLambda
        let d_loans = Self::row(fof, "change_in_loans").entries[B];
        let d_deposits = Self::row(fof, "change_in_deposits").entries[H];
        out.push(IdentityCheck::new(
            "regulatory.bank_saving",
            &[bal[B], -self.capital_ratio_banks * d_loans],
        ));
        out.push(IdentityCheck::new(
            "regulatory.deposits",
            &[d_deposits, -(d_loans - bal[B])],
        ));
        out
    }

    /// Largest relative residual among all identities.
    pub fn worst(&self) -> Option<IdentityCheck> {
        self.checks()
            .into_iter()
            .max_by(|a, b| a.relative().total_cmp(&b.relative()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityAudit {
    pub identity: String,
    pub max_relative_residual: f64,
    pub worst_t: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub pass: bool,
    pub tolerance: f64,
    pub samples: usize,
    pub identities: Vec<IdentityAudit>,
}

impl AuditReport {
    pub fn failing(&self) -> impl Iterator<Item = &IdentityAudit> {
        self.identities.iter().filter(|i| !i.pass)
    }

    pub fn identity(&self, name: &str) -> Option<&IdentityAudit> {
        self.identities.iter().find(|i| i.identity == name)
    }

    /// One CSV record per identity.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("identity,max_relative_residual,worst_t,pass\n");
        for i in &self.identities {
            s.push_str(&format!(
                "{},{:e},{},{}\n",
                i.identity, i.max_relative_residual, i.worst_t, i.pass
            ));
        }
        s
    }
}

/// Folds per-snapshot checks into a report, keeping the worst residual of
/// every identity.
pub fn audit_snapshots(snapshots: &[LedgerSnapshot]) -> AuditReport {
    let per_sample: Vec<Vec<IdentityCheck>> = snapshots.par_iter().map(|s| s.checks()).collect();
    let mut identities: Vec<IdentityAudit> = Vec::new();
    for (snap, checks) in snapshots.iter().zip(&per_sample) {
        if identities.is_empty() {
            identities = checks
                .iter()
                .map(|c| IdentityAudit {
                    identity: c.name.clone(),
                    max_relative_residual: 0.0,
                    worst_t: snap.t,
                    pass: true,
                })
                .collect();
        }
        for (agg, c) in identities.iter_mut().zip(checks) {
            let r = c.relative();
            // NaN residuals are failures
            if r > agg.max_relative_residual || r.is_nan() {
                agg.max_relative_residual = r;
                agg.worst_t = snap.t;
            }
        }
    }
    for agg in &mut identities {
        agg.pass = agg.max_relative_residual < AUDIT_TOL;
    }
    AuditReport {
        pass: !snapshots.is_empty() && identities.iter().all(|i| i.pass),
        tolerance: AUDIT_TOL,
        samples: snapshots.len(),
        identities,
    }
}

pub fn snapshots(traj: &Trajectory, params: &ModelParams) -> Result<Vec<LedgerSnapshot>> {
    traj.samples
        .par_iter()
        .map(|s| build_snapshot(s.t, &s.core, &s.aux, params))
        .collect()
}

/// Builds a snapshot at every sample and reports the worst residual of each
/// identity. Passes iff all are below [`AUDIT_TOL`].
pub fn audit_trajectory(traj: &Trajectory, params: &ModelParams) -> Result<AuditReport> {
    if traj.samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    Ok(audit_snapshots(&snapshots(traj, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, SolverSettings};
    use approx::assert_relative_eq;

    fn active() -> ModelParams {
        ModelParams::with_policy(0.2, 0.05, 0.03, 0.1, 0.2)
    }

    #[test]
    fn regulatory_proportions() {
        // k_r = 0.1 and dLambda = 100 per year: S_b = 10, dDelta = 90.
        let params = ModelParams::fixed_rate(0.03);
        let core = CoreState::new(0.8, 0.9, 1.0, 0.0, 0.0);
        let aux = AuxState::initial(0.0);
        // rates chosen so that d(ell p Y)/dt = 100 with p Y = 100, zero growth
        let rates = StateRates {
            core: CoreState::new(0.0, 0.0, 1.0, 0.0, 0.0),
            aux: AuxState::new(0.0, 0.0, 0.0),
        };
        let params = ModelParams {
            inflation_relax: 0.0,
            ..params
        };
        let snap = build_snapshot_with(0.0, &core, &aux, &rates, &params).unwrap();
        assert_relative_eq!(snap.financial_balances.banks, 10.0, max_relative = 1e-14);
        let d_dep = snap
            .flow_of_funds
            .iter()
            .find(|r| r.name == "change_in_deposits")
            .unwrap();
        assert_relative_eq!(d_dep.entries[0], 90.0, max_relative = 1e-14);
    }

    #[test]
    fn identities_hold_across_states() {
        let params = active();
        for (w, l, d, rho, rg, b) in [
            (0.8, 0.9, 0.6, 0.0, 0.0, 0.4),
            (0.7, 0.95, 6.0, -0.01, -0.02, 3.0),
            (0.2, 0.02, 1e5, 0.01, 0.03, 50.0),
            (1.1, 0.5, -0.5, 0.0, 0.05, -1.0),
        ] {
            let core = CoreState::new(w, l, d, rho, rg);
            let aux = AuxState::new(b, 1.7, 250.0);
            let snap = build_snapshot(12.0, &core, &aux, &params).unwrap();
            for c in snap.checks() {
                assert!(c.relative() < 1e-12, "{} {:e}", c.name, c.relative());
            }
            let s = &snap.financial_balances;
            let d_dep = snap.flow_of_funds[1].entries[0];
            let d_bills = snap.flow_of_funds[3].entries[0];
            assert!(
                (s.households - d_dep - d_bills).abs()
                    <= 1e-9 * s.households.abs().max(d_dep.abs())
            );
        }
    }

    #[test]
    fn consumption_closes_output() {
        let params = active();
        let snap = build_snapshot(
            0.0,
            &CoreState::new(0.8, 0.9, 0.6, 0.0, 0.0),
            &AuxState::initial(0.4),
            &params,
        )
        .unwrap();
        let c = snap.transaction("consumption").entries[1];
        let g = snap.transaction("gov_spending").entries[1];
        let i = snap.transaction("investment").entries[1];
        assert_relative_eq!(c + g + i, snap.nominal_output, max_relative = 1e-14);
        assert_relative_eq!(snap.net_worth.banks, 0.1 * 60.0, max_relative = 1e-14);
    }

    #[test]
    fn corrupted_dividends_are_flagged() {
        let params = ModelParams::fixed_rate(0.03);
        let traj = integrate(
            CoreState::new(0.8, 0.9, 0.6, 0.0, 0.0),
            AuxState::initial(0.0),
            &params,
            &SolverSettings::with_horizon(20.0),
        )
        .unwrap();
        let mut snaps = snapshots(&traj, &params).unwrap();
        assert!(audit_snapshots(&snaps).pass);
        let k = snaps.len() / 2;
        snaps[k].transaction_mut("dividends").unwrap().entries[0] += 1e-3;
        let report = audit_snapshots(&snaps);
        assert!(!report.pass);
        let flagged = report.identity("transactions.dividends").unwrap();
        assert!(!flagged.pass);
        assert_eq!(flagged.worst_t, snaps[k].t);
    }

    #[test]
    fn empty_and_invalid() {
        let params = ModelParams::default();
        let core = CoreState::new(0.8, 0.9, 0.6, 0.0, 0.0);
        assert!(build_snapshot(0.0, &core, &AuxState::new(0.0, 0.0, 100.0), &params).is_err());
        assert!(!audit_snapshots(&[]).pass);
    }

    fn state_at(t: f64, params: &ModelParams) -> (CoreState, AuxState) {
        let settings = SolverSettings {
            rel_tol: 1e-13,
            abs_tol: 1e-14,
            max_step: 0.05,
            convergence: None,
            ..SolverSettings::with_horizon(t)
        };
        let traj = integrate(
            CoreState::new(0.8, 0.9, 6.0, 0.0, 0.0),
            AuxState::initial(0.4),
            params,
            &settings,
        )
        .unwrap();
        let s = traj.last();
        (s.core, s.aux)
    }

    #[test]
    fn net_worths_evolve_with_balances() {
        let params = ModelParams::with_policy(0.2, 0.0, 0.03, 0.1, 0.2);
        let (t, h) = (15.0, 1e-3);
        let snap_at = |time: f64| {
            let (c, a) = state_at(time, &params);
            build_snapshot(time, &c, &a, &params).unwrap()
        };
        let mid = snap_at(t);
        let (lo1, hi1) = (snap_at(t - h), snap_at(t + h));
        let (lo2, hi2) = (snap_at(t - 2.0 * h), snap_at(t + 2.0 * h));
        // Richardson-extrapolated central difference
        let fd = |f: fn(&NetWorth) -> f64| {
            let d1 = (f(&hi1.net_worth) - f(&lo1.net_worth)) / (2.0 * h);
            let d2 = (f(&hi2.net_worth) - f(&lo2.net_worth)) / (4.0 * h);
            (4.0 * d1 - d2) / 3.0
        };
        let s = &mid.financial_balances;
        // relative to the largest term on the flow side
        let close = |x: f64, terms: &[f64]| {
            let y: f64 = terms.iter().sum();
            let scale = terms.iter().fold(x.abs(), |m, v| m.max(v.abs()));
            (x - y).abs() <= 1e-6 * scale
        };
        assert!(close(fd(|n| n.households), &[s.households]));
        assert!(close(fd(|n| n.banks), &[s.banks]));
        assert!(close(fd(|n| n.public), &[s.public]));
        assert!(close(fd(|n| n.firms), &[s.firms, mid.capital_revaluation]));
        // d(pK)/dt = dp/dt K + p (I - delta K)
        assert!(close(
            fd(|n| n.total),
            &[mid.capital_revaluation, -s.firms_capital]
        ));
    }
}
