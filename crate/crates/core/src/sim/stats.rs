//! Summary statistics of simulated outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::strategy::PathOutcomes;

/// Mean of the worst `alpha` fraction of `samples`. When `n alpha` is not an
/// integer the boundary sample enters with its fractional weight.
pub fn expected_shortfall(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(crate::error::invalid(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let na = n as f64 * alpha;
    let rounded = na.round();
    if (na - rounded).abs() <= 1e-9 * na.max(1.0) && rounded >= 1.0 {
        let k = rounded as usize;
        return Ok(x[..k].iter().sum::<f64>() / k as f64);
    }
    let k = na.floor() as usize;
    let head: f64 = x[..k].iter().sum();
    Ok((head + (na - k as f64) * x[k]) / na)
}

/// Empirical percentile `pct` in `[0, 100]` of sorted data, interpolating
/// linearly between order statistics.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (pct / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, 50.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub alpha: f64,
    pub es: f64,
    /// `EW / (M + 1)`.
    pub ew_per_withdrawal: f64,
    pub median_terminal: f64,
    /// `sum_n Median(p_n) / M`.
    pub mean_median_weight: f64,
    pub n_paths: usize,
}

pub fn ew_es_summary(out: &PathOutcomes, alpha: f64) -> Result<SummaryStats> {
    if out.n_paths == 0 {
        return Err(Error::EmptySample);
    }
    let es = expected_shortfall(&out.terminal, alpha)?;
    let total: f64 = out.withdrawals.iter().sum();
    let ew_per_withdrawal = total / (out.n_paths * (out.m + 1)) as f64;
    let mut column = vec![0.0; out.n_paths];
    let mut weight_sum = 0.0;
    for n in 0..out.m {
        for (k, c) in column.iter_mut().enumerate() {
            *c = out.weights[k * out.m + n];
        }
        weight_sum += median(&column);
    }
    Ok(SummaryStats {
        alpha,
        es,
        ew_per_withdrawal,
        median_terminal: median(&out.terminal),
        mean_median_weight: if out.m > 0 {
            weight_sum / out.m as f64
        } else {
            0.0
        },
        n_paths: out.n_paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FanField {
    Weight,
    Withdrawal,
    /// Wealth just before the withdrawal.
    Wealth,
}

/// Percentiles of a field at one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanPoint {
    pub n: usize,
    pub values: Vec<f64>,
}

/// Requested percentiles of `field` across paths at every date.
pub fn percentile_fan(
    out: &PathOutcomes,
    percentiles: &[f64],
    field: FanField,
) -> Result<Vec<FanPoint>> {
    if out.n_paths == 0 {
        return Err(Error::EmptySample);
    }
    let (data, width) = match field {
        FanField::Weight => (&out.weights, out.m),
        FanField::Withdrawal => (&out.withdrawals, out.m + 1),
        FanField::Wealth => (&out.wealth_before, out.m + 1),
    };
    let mut column = vec![0.0; out.n_paths];
    Ok((0..width)
        .map(|n| {
            for (k, c) in column.iter_mut().enumerate() {
                *c = data[k * width + n];
            }
            column.sort_by(f64::total_cmp);
            FanPoint {
                n,
                values: percentiles
                    .iter()
                    .map(|&p| percentile_sorted(&column, p))
                    .collect(),
            }
        })
        .collect())
}
