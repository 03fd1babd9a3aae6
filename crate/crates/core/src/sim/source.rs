//! Sources of annual gross returns per path.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{invalid, Result};
use crate::history::PairedHistory;
use crate::market::{path_rng, MarketParams, PeriodReturns, ReturnSampler};

/// Yields the per-period `(r_s, r_b)` sequence of any path on demand. The
/// sequence of a path depends only on the source and the path index.
pub trait PathSource: Sync {
    fn n_paths(&self) -> usize;
    fn periods(&self) -> usize;
    fn fill_path(&self, path: usize, out: &mut Vec<PeriodReturns>);
}

/// Exact draws from the parametric jump-diffusion market.
pub struct SyntheticSource {
    sampler: ReturnSampler,
    periods: usize,
    n_paths: usize,
    seed: u64,
}

impl SyntheticSource {
    pub fn new(
        market: &MarketParams,
        dt: f64,
        periods: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(SyntheticSource {
            sampler: ReturnSampler::new(market, dt)?,
            periods,
            n_paths,
            seed,
        })
    }
}

impl PathSource for SyntheticSource {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn periods(&self) -> usize {
        self.periods
    }

    fn fill_path(&self, path: usize, out: &mut Vec<PeriodReturns>) {
        let mut rng = path_rng(self.seed, path as u64);
        out.clear();
        out.extend((0..self.periods).map(|_| self.sampler.sample(&mut rng)));
    }
}

/// Stationary block bootstrap of paired monthly log returns.
pub struct BootstrapSource {
    stock: Vec<f64>,
    bond: Vec<f64>,
    /// Success probability of the geometric block length; zero for a single
    /// unending block.
    restart: f64,
    months_per_period: usize,
    periods: usize,
    n_paths: usize,
    seed: u64,
    fixed_start: Option<usize>,
}

impl BootstrapSource {
    /// `b_hat` is the expected block length in years and may be infinite.
    pub fn new(
        history: &PairedHistory,
        b_hat: f64,
        dt: f64,
        periods: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        if history.is_empty() {
            return Err(invalid("bootstrap needs a non-empty history"));
        }
        if !(b_hat > 0.0) {
            return Err(invalid(format!("expected block size {b_hat} must be > 0")));
        }
        let months = dt * 12.0;
        if !(months >= 1.0) || (months - months.round()).abs() > 1e-9 {
            return Err(invalid(format!(
                "period of {dt} years is not a whole number of months"
            )));
        }
        let block_months = b_hat * 12.0;
        let restart = if block_months.is_infinite() {
            0.0
        } else {
            (1.0 / block_months).min(1.0)
        };
        Ok(BootstrapSource {
            stock: history.stock.log_returns.clone(),
            bond: history.bond.log_returns.clone(),
            restart,
            months_per_period: months.round() as usize,
            periods,
            n_paths,
            seed,
            fixed_start: None,
        })
    }

    /// Starts every block at month `start` instead of a uniform draw.
    pub fn with_fixed_start(mut self, start: usize) -> Self {
        self.fixed_start = Some(start % self.stock.len());
        self
    }

    /// Paired monthly log returns of one path, before compounding.
    pub fn monthly_path(&self, path: usize) -> Vec<(f64, f64)> {
        let mut rng = path_rng(self.seed, path as u64);
        let len = self.stock.len();
        let need = self.periods * self.months_per_period;
        let geometric = (self.restart > 0.0)
            .then(|| Geometric::new(self.restart).expect("probability in (0, 1]"));
        let mut out = Vec::with_capacity(need);
        while out.len() < need {
            let start = match self.fixed_start {
                Some(s) => s,
                None => rng.random_range(0..len),
            };
            let block = match &geometric {
                Some(g) => 1 + g.sample(&mut rng) as usize,
                None => usize::MAX,
            };
            let take = block.min(need - out.len());
            out.extend((0..take).map(|k| {
                let i = (start + k) % len;
                (self.stock[i], self.bond[i])
            }));
        }
        out
    }
}

impl PathSource for BootstrapSource {
    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn periods(&self) -> usize {
        self.periods
    }

    fn fill_path(&self, path: usize, out: &mut Vec<PeriodReturns>) {
        let monthly = self.monthly_path(path);
        out.clear();
        out.extend(monthly.chunks(self.months_per_period).map(|c| {
            let (ls, lb) = c.iter().fold((0.0, 0.0), |(a, b), &(s, r)| (a + s, b + r));
            PeriodReturns {
                r_s: ls.exp(),
                r_b: lb.exp(),
            }
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::ReturnSeries;

    fn history(n: usize) -> PairedHistory {
        let s: Vec<f64> = (0..n).map(|i| 0.001 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| -0.0005 * i as f64).collect();
        PairedHistory::new(ReturnSeries::from_returns(s), ReturnSeries::from_returns(b)).unwrap()
    }

    #[test]
    fn one_endless_block_from_a_fixed_start_replays_history() {
        let h = history(30);
        let src = BootstrapSource::new(&h, f64::INFINITY, 1.0, 4, 3, 9)
            .unwrap()
            .with_fixed_start(5);
        let months = src.monthly_path(2);
        assert_eq!(months.len(), 48);
        for (k, &(s, b)) in months.iter().enumerate() {
            let i = (5 + k) % 30;
            assert_eq!((s, b), (h.stock.log_returns[i], h.bond.log_returns[i]));
        }
    }

    #[test]
    fn resampled_months_keep_stock_and_bond_paired() {
        let h = history(120);
        let src = BootstrapSource::new(&h, 0.5, 1.0, 10, 20, 3).unwrap();
        for path in 0..20 {
            for (s, b) in src.monthly_path(path) {
                let i = (s / 0.001).round() as usize;
                assert!(i < 120);
                assert_eq!(b, h.bond.log_returns[i]);
            }
        }
    }

    #[test]
    fn periods_compound_whole_months() {
        let h = history(60);
        let src = BootstrapSource::new(&h, 2.0, 1.0, 3, 4, 1).unwrap();
        let months = src.monthly_path(1);
        let mut out = Vec::new();
        src.fill_path(1, &mut out);
        let ls: f64 = months[12..24].iter().map(|m| m.0).sum();
        assert!((out[1].r_s - ls.exp()).abs() < 1e-14);
    }

    #[test]
    fn bootstrap_rejects_bad_settings() {
        let h = history(12);
        assert!(BootstrapSource::new(&h, 0.0, 1.0, 3, 4, 1).is_err());
        assert!(BootstrapSource::new(&h, 2.0, 0.05, 3, 4, 1).is_err());
    }

    #[test]
    fn paths_depend_only_on_their_index() {
        let src = SyntheticSource::new(&MarketParams::crsp_1926_2018(), 1.0, 5, 10, 42).unwrap();
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        src.fill_path(7, &mut a);
        src.fill_path(3, &mut b);
        src.fill_path(7, &mut c);
        assert_eq!(a, c);
        assert_ne!(a, b);
    }
}
