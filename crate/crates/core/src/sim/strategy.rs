//! Strategy evaluation along return paths.

use rayon::prelude::*;

use crate::arva::WithdrawalRule;
use crate::dp::control::ControlTable;
use crate::error::{invalid, Result};
use crate::market::PeriodReturns;
use crate::scenario::Scenario;
use crate::sim::source::PathSource;

#[derive(Debug, Clone)]
pub enum Strategy {
    /// Fixed equity weight and the same withdrawal `q` every year.
    ConstantWeightConstantQ { p: f64, q: f64 },
    /// Fixed equity weight with the scenario's withdrawal rule.
    ConstantWeightArva { p: f64 },
    /// Stored optimal controls with the scenario's withdrawal rule.
    ControlTable(ControlTable),
}

impl Strategy {
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        match self {
            Strategy::ConstantWeightConstantQ { p, .. } | Strategy::ConstantWeightArva { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid(format!("equity weight {p} outside [0, 1]")));
                }
            }
            Strategy::ControlTable(t) => {
                t.validate()?;
                if t.dates() != scenario.m {
                    return Err(invalid(format!(
                        "control table has {} dates, scenario rebalances {} times",
                        t.dates(),
                        scenario.m
                    )));
                }
            }
        }
        Ok(())
    }

    fn rule(&self, scenario: &Scenario) -> WithdrawalRule {
        match self {
            Strategy::ConstantWeightConstantQ { q, .. } => WithdrawalRule::constant(*q, scenario.m),
            _ => scenario.rule.clone(),
        }
    }

    /// Equity weight at date `n` for post-withdrawal wealth `w > 0`.
    #[inline]
    fn weight(&self, n: usize, w: f64) -> f64 {
        match self {
            Strategy::ConstantWeightConstantQ { p, .. } | Strategy::ConstantWeightArva { p } => *p,
            Strategy::ControlTable(t) => t.control(n, w),
        }
    }
}

/// Per-path records, stored row-major by path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcomes {
    /// Rebalancing periods `M`; there are `M + 1` withdrawals.
    pub m: usize,
    pub n_paths: usize,
    /// `q_0 .. q_M`.
    pub withdrawals: Vec<f64>,
    /// `W(t_n^-)` for `n = 0 .. M`.
    pub wealth_before: Vec<f64>,
    /// Applied equity weight at `t_0 .. t_{M-1}`.
    pub weights: Vec<f64>,
    /// `W_T = W(t_M^-) - q_M`.
    pub terminal: Vec<f64>,
}

impl PathOutcomes {
    pub fn withdrawals_of(&self, path: usize) -> &[f64] {
        &self.withdrawals[path * (self.m + 1)..(path + 1) * (self.m + 1)]
    }

    pub fn wealth_before_of(&self, path: usize) -> &[f64] {
        &self.wealth_before[path * (self.m + 1)..(path + 1) * (self.m + 1)]
    }

    pub fn weights_of(&self, path: usize) -> &[f64] {
        &self.weights[path * self.m..(path + 1) * self.m]
    }

    /// `W(t_n^+)` on one path.
    pub fn wealth_after(&self, path: usize, n: usize) -> f64 {
        self.wealth_before_of(path)[n] - self.withdrawals_of(path)[n]
    }
}

const CHUNK: usize = 256;

/// Runs `strategy` along every path of `source`. Output is independent of the
/// number of worker threads.
pub fn simulate_strategy(
    source: &dyn PathSource,
    strategy: &Strategy,
    scenario: &Scenario,
) -> Result<PathOutcomes> {
    strategy.validate(scenario)?;
    let m = scenario.m;
    if source.periods() != m {
        return Err(invalid(format!(
            "path source has {} periods, scenario has {m}",
            source.periods()
        )));
    }
    let n = source.n_paths();
    let rule = strategy.rule(scenario);
    let spread = (scenario.market.mu_c_b * scenario.dt()).exp();
    let mut out = PathOutcomes {
        m,
        n_paths: n,
        withdrawals: vec![0.0; n * (m + 1)],
        wealth_before: vec![0.0; n * (m + 1)],
        weights: vec![0.0; n * m],
        terminal: vec![0.0; n],
    };
    out.withdrawals
        .par_chunks_mut(CHUNK * (m + 1))
        .zip(out.wealth_before.par_chunks_mut(CHUNK * (m + 1)))
        .zip(out.weights.par_chunks_mut(CHUNK * m.max(1)))
        .zip(out.terminal.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, (((qs, ws), ps), ts))| {
            let mut returns: Vec<PeriodReturns> = Vec::with_capacity(m);
            for (k, t) in ts.iter_mut().enumerate() {
                source.fill_path(c * CHUNK + k, &mut returns);
                let q = &mut qs[k * (m + 1)..(k + 1) * (m + 1)];
                let wb = &mut ws[k * (m + 1)..(k + 1) * (m + 1)];
                let p = &mut ps[k * m..(k + 1) * m];
                *t = run_path(scenario.w0, &returns, &rule, strategy, spread, q, wb, p);
            }
        });
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    w0: f64,
    returns: &[PeriodReturns],
    rule: &WithdrawalRule,
    strategy: &Strategy,
    spread: f64,
    q: &mut [f64],
    wealth: &mut [f64],
    weights: &mut [f64],
) -> f64 {
    let m = returns.len();
    let mut w = w0;
    for n in 0..m {
        wealth[n] = w;
        q[n] = rule.withdrawal(n, w);
        let w_plus = w - q[n];
        let r = returns[n];
        if w_plus > 0.0 {
            let p = strategy.weight(n, w_plus);
            weights[n] = p;
            w = w_plus * (p * r.r_s + (1.0 - p) * r.r_b);
        } else {
            weights[n] = 0.0;
            w = w_plus * r.r_b * spread;
        }
    }
    wealth[m] = w;
    q[m] = rule.withdrawal(m, w);
    w - q[m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketParams;
    use crate::sim::source::SyntheticSource;

    fn frozen(w0: f64, q: f64, m: usize) -> Scenario {
        Scenario::new(
            MarketParams::frozen(),
            WithdrawalRule::constant(q, m),
            w0,
            m as f64,
            m,
        )
        .unwrap()
    }

    #[test]
    fn frozen_market_is_cash_accounting() {
        let sc = frozen(1000.0, 40.0, 5);
        let src = SyntheticSource::new(&sc.market, 1.0, 5, 3, 0).unwrap();
        let out = simulate_strategy(&src, &Strategy::ConstantWeightArva { p: 0.4 }, &sc).unwrap();
        for path in 0..3 {
            assert_eq!(out.terminal[path], 760.0);
            assert_eq!(
                out.wealth_before_of(path),
                &[1000.0, 960.0, 920.0, 880.0, 840.0, 800.0]
            );
            assert!(out.weights_of(path).iter().all(|&p| p == 0.4));
        }
    }

    #[test]
    fn debt_grows_at_the_borrowing_rate() {
        let mut market = MarketParams::frozen();
        market.mu_c_b = 0.05;
        let sc = Scenario::new(market, WithdrawalRule::constant(40.0, 2), 20.0, 2.0, 2).unwrap();
        let src = SyntheticSource::new(&sc.market, 1.0, 2, 1, 0).unwrap();
        let out = simulate_strategy(&src, &Strategy::ConstantWeightArva { p: 1.0 }, &sc).unwrap();
        let g = 0.05f64.exp();
        let w1 = -20.0 * g;
        let w2 = (w1 - 40.0) * g;
        assert!((out.wealth_before_of(0)[1] - w1).abs() < 1e-12);
        assert!((out.terminal[0] - (w2 - 40.0)).abs() < 1e-12);
        assert_eq!(out.weights_of(0), &[0.0, 0.0]);
    }

    #[test]
    fn constant_q_strategy_overrides_the_rule() {
        let sc = frozen(1000.0, 40.0, 3);
        let src = SyntheticSource::new(&sc.market, 1.0, 3, 2, 0).unwrap();
        let s = Strategy::ConstantWeightConstantQ { p: 0.0, q: 10.0 };
        let out = simulate_strategy(&src, &s, &sc).unwrap();
        assert_eq!(out.terminal, vec![960.0, 960.0]);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let sc = frozen(1000.0, 40.0, 3);
        let src = SyntheticSource::new(&sc.market, 1.0, 4, 2, 0).unwrap();
        assert!(simulate_strategy(&src, &Strategy::ConstantWeightArva { p: 0.5 }, &sc).is_err());
        let src = SyntheticSource::new(&sc.market, 1.0, 3, 2, 0).unwrap();
        assert!(simulate_strategy(&src, &Strategy::ConstantWeightArva { p: 1.5 }, &sc).is_err());
    }
}
