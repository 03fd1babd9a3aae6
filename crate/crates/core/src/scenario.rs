//! A fully specified decumulation problem.

use serde::{Deserialize, Serialize};

use crate::arva::{ArvaConfig, WithdrawalRule};
use crate::error::{invalid, Result};
use crate::market::MarketParams;
use crate::mortality::MortalityTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub market: MarketParams,
    /// Withdrawal rule for dates `t_0 .. t_M`.
    pub rule: WithdrawalRule,
    /// Initial wealth before the first withdrawal.
    pub w0: f64,
    pub horizon: f64,
    /// Number of rebalancing periods `M`.
    pub m: usize,
}

impl Scenario {
    pub fn new(
        market: MarketParams,
        rule: WithdrawalRule,
        w0: f64,
        horizon: f64,
        m: usize,
    ) -> Result<Self> {
        let s = Scenario {
            market,
            rule,
            w0,
            horizon,
            m,
        };
        s.validate()?;
        Ok(s)
    }

    /// 65-year-old male, 1000 of initial wealth, 30 years, annual ARVA
    /// withdrawals bounded by 30 and 80, fitted jump-diffusion market.
    pub fn base(table: &MortalityTable) -> Result<Self> {
        let rule = WithdrawalRule::arva(&ArvaConfig::default(), table, 30)?;
        Scenario::new(MarketParams::crsp_1926_2018(), rule, 1000.0, 30.0, 30)
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        if self.m == 0 {
            return Err(invalid("need at least one rebalancing period"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        if !self.w0.is_finite() {
            return Err(invalid("initial wealth must be finite"));
        }
        if self.rule.dates() != self.m + 1 {
            return Err(invalid(format!(
                "withdrawal rule covers {} dates, scenario has {}",
                self.rule.dates(),
                self.m + 1
            )));
        }
        if self.rule.q_min > self.rule.q_max {
            return Err(invalid("q_min exceeds q_max"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.m as f64
    }
}
