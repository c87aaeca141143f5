//! Behavioural functions and right-hand sides of the model.
//!
//! The reduced system evolves the wage share, employment rate, private debt
//! ratio, target rate and policy rate. Government debt ratio, price level
//! and real output are carried as auxiliary coordinates: they never feed
//! back into the core system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, PolicyMode};

/// Core coordinates. The same type is used for their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreState {
    pub wage_share: f64,
    pub employment: f64,
    pub private_debt_ratio: f64,
    pub target_rate: f64,
    pub policy_rate: f64,
}

/// Auxiliary coordinates. The same type is used for their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub gov_debt_ratio: f64,
    pub price_level: f64,
    pub real_output: f64,
}

/// Initial price level.
pub const PRICE_LEVEL_0: f64 = 1.0;
/// Initial real output.
pub const REAL_OUTPUT_0: f64 = 100.0;
/// Initial labour productivity.
pub const PRODUCTIVITY_0: f64 = 1.0;

impl CoreState {
    pub const DIM: usize = 5;

    pub fn new(
        wage_share: f64,
        employment: f64,
        private_debt_ratio: f64,
        target_rate: f64,
        policy_rate: f64,
    ) -> Self {
        Self {
            wage_share,
            employment,
            private_debt_ratio,
            target_rate,
            policy_rate,
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [
            self.wage_share,
            self.employment,
            self.private_debt_ratio,
            self.target_rate,
            self.policy_rate,
        ]
    }

    pub fn from_array(x: [f64; 5]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Sup-norm of the coordinate-wise difference.
    pub fn distance(&self, other: &CoreState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidState(format!(
                "non-finite core state {self:?}"
            )));
        }
        if self.wage_share < 0.0 {
            return Err(Error::InvalidState("wage share must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.employment) {
            return Err(Error::InvalidState("employment must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

impl AuxState {
    pub const DIM: usize = 3;

    pub fn new(gov_debt_ratio: f64, price_level: f64, real_output: f64) -> Self {
        Self {
            gov_debt_ratio,
            price_level,
            real_output,
        }
    }

    /// Government debt ratio `b` with the default level normalization.
    pub fn initial(gov_debt_ratio: f64) -> Self {
        Self::new(gov_debt_ratio, PRICE_LEVEL_0, REAL_OUTPUT_0)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.gov_debt_ratio, self.price_level, self.real_output]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidState(format!(
                "non-finite aux state {self:?}"
            )));
        }
        if self.price_level <= 0.0 || self.real_output <= 0.0 {
            return Err(Error::InvalidState(
                "price level and real output must be > 0".into(),
            ));
        }
        Ok(())
    }
}

impl ModelParams {
    /// Wage-growth response to employment, `a + b / (1 - lambda)^2`.
    pub fn phillips(&self, employment: f64) -> Result<f64> {
        if employment >= 1.0 || employment.is_nan() {
            return Err(Error::Domain {
                function: "phillips",
                value: employment,
                constraint: "employment < 1",
            });
        }
        let gap = 1.0 - employment;
        Ok(self.phillips_const + self.phillips_coef / (gap * gap))
    }

    /// Employment rate at which the Phillips curve yields `wage_growth`.
    pub fn phillips_inverse(&self, wage_growth: f64) -> Result<f64> {
        let excess = wage_growth - self.phillips_const;
        if excess <= 0.0 || excess.is_nan() {
            return Err(Error::Domain {
                function: "phillips_inverse",
                value: wage_growth,
                constraint: "wage growth > phillips_const",
            });
        }
        Ok(1.0 - (self.phillips_coef / excess).sqrt())
    }

    /// Investment share of output, `c + exp(d + e*pi)`. Unbounded above.
    pub fn investment(&self, profit_share: f64) -> f64 {
        self.inv_const + (self.inv_shift + self.inv_slope * profit_share).exp()
    }

    pub fn investment_inverse(&self, share: f64) -> Result<f64> {
        let excess = share - self.inv_const;
        if excess <= 0.0 || excess.is_nan() {
            return Err(Error::Domain {
                function: "investment_inverse",
                value: share,
                constraint: "investment share > inv_const",
            });
        }
        Ok((excess.ln() - self.inv_shift) / self.inv_slope)
    }

    /// Price inflation `eta_p (m omega - 1)`.
    pub fn inflation(&self, wage_share: f64) -> f64 {
        self.inflation_relax * (self.markup * wage_share - 1.0)
    }

    pub fn lending_rate(&self, core: &CoreState) -> f64 {
        match self.policy_mode {
            PolicyMode::ActiveRule => core.policy_rate + self.loan_spread,
            PolicyMode::FixedRate { rate } => rate,
        }
    }

    /// Deposits pay the policy rate.
    pub fn deposit_rate(&self, core: &CoreState) -> f64 {
        core.policy_rate
    }

    /// Pre-depreciation profits over nominal output.
    pub fn profit_share(&self, core: &CoreState) -> f64 {
        1.0 - core.wage_share - self.tax_share - self.lending_rate(core) * core.private_debt_ratio
    }

    /// Growth rate of real capital (and real output), `kappa(pi)/nu - delta`.
    pub fn capital_growth(&self, core: &CoreState) -> f64 {
        self.investment(self.profit_share(core)) / self.capital_output - self.depreciation
    }

    pub fn core_rhs(&self, core: &CoreState) -> Result<CoreState> {
        if !core.is_finite() {
            return Err(Error::InvalidState(format!(
                "non-finite core state {core:?}"
            )));
        }
        let phi = self
            .phillips(core.employment)
            .map_err(|_| Error::SingularState(format!("employment {} >= 1", core.employment)))?;
        let infl = self.inflation(core.wage_share);
        let kappa = self.investment(self.profit_share(core));
        let g_k = kappa / self.capital_output - self.depreciation;
        let growth_gap = g_k - self.natural_growth();

        let d_wage =
            core.wage_share * (phi - self.productivity_growth - (1.0 - self.money_illusion) * infl);
        let d_employment = core.employment * growth_gap;
        let d_debt = core.private_debt_ratio * (self.lending_rate(core) - g_k - infl)
            + core.wage_share
            + self.tax_share
            + kappa
            - 1.0;
        let (d_target, d_policy) = match self.policy_mode {
            PolicyMode::ActiveRule => (
                self.target_adjust_speed * growth_gap,
                self.rate_adjust_speed * (core.target_rate - core.policy_rate),
            ),
            PolicyMode::FixedRate { .. } => (0.0, 0.0),
        };
        Ok(CoreState::new(
            d_wage,
            d_employment,
            d_debt,
            d_target,
            d_policy,
        ))
    }

    pub fn aux_rhs(&self, core: &CoreState, aux: &AuxState) -> AuxState {
        let infl = self.inflation(core.wage_share);
        let g_k = self.capital_growth(core);
        let d_b = (self.gov_spend_share - self.tax_share)
            + aux.gov_debt_ratio * (core.policy_rate - infl - g_k);
        AuxState::new(d_b, aux.price_level * infl, aux.real_output * g_k)
    }
}

/// Quantities derived from the state at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedObservables {
    pub profit_share: f64,
    pub inflation: f64,
    pub lending_rate: f64,
    pub deposit_rate: f64,
    pub capital_growth: f64,
    pub productivity: f64,
    pub employed: f64,
    pub nominal_wage: f64,
    pub capital: f64,
    pub loans: f64,
    pub gov_debt: f64,
    pub deposits: f64,
}

impl DerivedObservables {
    pub fn compute(t: f64, core: &CoreState, aux: &AuxState, params: &ModelParams) -> Self {
        let p = aux.price_level;
        let y = aux.real_output;
        let productivity = PRODUCTIVITY_0 * (params.productivity_growth * t).exp();
        let loans = core.private_debt_ratio * p * y;
        Self {
            profit_share: params.profit_share(core),
            inflation: params.inflation(core.wage_share),
            lending_rate: params.lending_rate(core),
            deposit_rate: params.deposit_rate(core),
            capital_growth: params.capital_growth(core),
            productivity,
            employed: y / productivity,
            nominal_wage: core.wage_share * p * productivity,
            capital: params.capital_output * y,
            loans,
            gov_debt: aux.gov_debt_ratio * p * y,
            // Closed-form integral of dDelta = (1 - k_r) dLambda from
            // Delta_0 = (1 - k_r) Lambda_0.
            deposits: (1.0 - params.capital_ratio_banks) * loans,
        }
    }

    /// Labour force implied by the employment rate; infinite when nobody is
    /// employed.
    pub fn labor_force(&self, core: &CoreState) -> f64 {
        self.employed / core.employment
    }
}
