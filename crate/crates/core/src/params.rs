//! Structural constants of the model.
//!
//! The Phillips-curve constants are named `phillips_const`/`phillips_coef`
//! rather than `a`/`b` so they cannot be confused with productivity or the
//! government debt ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the interest rate charged on loans is determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyMode {
    /// The policy rate follows the target-rate feedback rule and loans pay
    /// `r_g + loan_spread`.
    ActiveRule,
    /// Loans pay a constant rate; the target and policy rates are frozen.
    FixedRate { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub phillips_const: f64,
    pub phillips_coef: f64,
    pub inv_const: f64,
    pub inv_shift: f64,
    pub inv_slope: f64,
    pub capital_ratio_banks: f64,
    pub markup: f64,
    pub productivity_growth: f64,
    pub labor_growth: f64,
    pub money_illusion: f64,
    pub depreciation: f64,
    pub inflation_relax: f64,
    pub capital_output: f64,
    pub gov_spend_share: f64,
    pub tax_share: f64,
    pub loan_spread: f64,
    pub rate_adjust_speed: f64,
    pub target_adjust_speed: f64,
    pub policy_mode: PolicyMode,
}

impl Default for ModelParams {
    /// Baseline calibration with no fiscal flows and the policy rule switched
    /// off (both adjustment speeds zero).
    fn default() -> Self {
        Self {
            phillips_const: -0.0401,
            phillips_coef: 0.0001,
            inv_const: -0.0065,
            inv_shift: -5.0,
            inv_slope: 20.0,
            capital_ratio_banks: 0.1,
            markup: 1.3,
            productivity_growth: 0.025,
            labor_growth: 0.02,
            money_illusion: 0.8,
            depreciation: 0.03,
            inflation_relax: 0.35,
            capital_output: 3.0,
            gov_spend_share: 0.0,
            tax_share: 0.0,
            loan_spread: 0.03,
            rate_adjust_speed: 0.0,
            target_adjust_speed: 0.0,
            policy_mode: PolicyMode::ActiveRule,
        }
    }
}

impl ModelParams {
    /// Baseline constants with loans priced at a constant `rate`.
    pub fn fixed_rate(rate: f64) -> Self {
        Self {
            policy_mode: PolicyMode::FixedRate { rate },
            ..Self::default()
        }
    }

    /// Baseline constants with government spending and the feedback rule
    /// active.
    pub fn with_policy(
        gov_spend_share: f64,
        tax_share: f64,
        loan_spread: f64,
        rate_adjust_speed: f64,
        target_adjust_speed: f64,
    ) -> Self {
        Self {
            gov_spend_share,
            tax_share,
            loan_spread,
            rate_adjust_speed,
            target_adjust_speed,
            policy_mode: PolicyMode::ActiveRule,
            ..Self::default()
        }
    }

    pub fn is_fixed_rate(&self) -> bool {
        matches!(self.policy_mode, PolicyMode::FixedRate { .. })
    }

    /// Equilibrium growth rate of real output, `alpha + beta`.
    pub fn natural_growth(&self) -> f64 {
        self.productivity_growth + self.labor_growth
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("phillips_const", self.phillips_const),
            ("phillips_coef", self.phillips_coef),
            ("inv_const", self.inv_const),
            ("inv_shift", self.inv_shift),
            ("inv_slope", self.inv_slope),
            ("capital_ratio_banks", self.capital_ratio_banks),
            ("markup", self.markup),
            ("productivity_growth", self.productivity_growth),
            ("labor_growth", self.labor_growth),
            ("money_illusion", self.money_illusion),
            ("depreciation", self.depreciation),
            ("inflation_relax", self.inflation_relax),
            ("capital_output", self.capital_output),
            ("gov_spend_share", self.gov_spend_share),
            ("tax_share", self.tax_share),
            ("loan_spread", self.loan_spread),
            ("rate_adjust_speed", self.rate_adjust_speed),
            ("target_adjust_speed", self.target_adjust_speed),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParams(msg.to_string()))
            }
        };
        check(self.markup >= 1.0, "markup must be >= 1")?;
        check(
            self.capital_ratio_banks > 0.0 && self.capital_ratio_banks < 1.0,
            "capital_ratio_banks must lie in (0, 1)",
        )?;
        check(self.capital_output > 0.0, "capital_output must be > 0")?;
        check(self.depreciation >= 0.0, "depreciation must be >= 0")?;
        check(self.phillips_coef > 0.0, "phillips_coef must be > 0")?;
        check(self.inv_slope > 0.0, "inv_slope must be > 0")?;
        check(
            (0.0..=1.0).contains(&self.money_illusion),
            "money_illusion must lie in [0, 1]",
        )?;
        check(
            self.rate_adjust_speed >= 0.0 && self.target_adjust_speed >= 0.0,
            "adjustment speeds must be >= 0",
        )?;
        if let PolicyMode::FixedRate { rate } = self.policy_mode {
            check(rate.is_finite(), "fixed lending rate must be finite")?;
            check(
                self.rate_adjust_speed == 0.0 && self.target_adjust_speed == 0.0,
                "fixed_rate mode requires rate_adjust_speed = target_adjust_speed = 0",
            )?;
        }
        Ok(())
    }
}
