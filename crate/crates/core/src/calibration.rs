//! Threshold estimation of jump-diffusion and GBM parameters from monthly
//! real log returns.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::history::{PairedHistory, ReturnSeries};
use crate::market::{JumpParams, MarketParams};

const MAX_ITERATIONS: usize = 100;

/// Result of the recursive threshold filter.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDetection {
    /// Annualized diffusive volatility of the unflagged returns.
    pub sigma_hat: f64,
    /// Sorted indices of returns flagged as containing a jump.
    pub jump_indices: Vec<usize>,
    /// Per-period mean of the unflagged returns (the detrending level).
    pub mean: f64,
    pub iterations: usize,
}

impl JumpDetection {
    /// Whether `|r - mean| > beta * sigma_hat * sqrt(dt)`.
    pub fn exceeds(&self, r: f64, beta: f64, dt: f64) -> bool {
        (r - self.mean).abs() > beta * self.sigma_hat * dt.sqrt()
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let ss = centered_sum_sq(values, mean);
    let std = if n > 1 {
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std, n)
}

// Exact zero for constant input, where the rounded mean can differ from the
// common value.
fn centered_sum_sq(values: impl Iterator<Item = f64> + Clone, mean: f64) -> f64 {
    let mut it = values.clone();
    let first = it.next();
    if first.is_some_and(|f| it.all(|v| v == f)) {
        return 0.0;
    }
    values.map(|v| (v - mean) * (v - mean)).sum()
}

/// Flags returns whose detrended size exceeds `beta` diffusive standard
/// deviations, re-estimating the volatility and detrending level from the
/// unflagged returns until the flagged set stops changing.
pub fn detect_jumps(series: &ReturnSeries, beta: f64) -> Result<JumpDetection> {
    if !(beta > 0.0) {
        return Err(invalid(format!("threshold beta = {beta} must be > 0")));
    }
    if series.len() < 24 {
        return Err(invalid(format!(
            "need at least 24 returns, got {}",
            series.len()
        )));
    }
    let r = &series.log_returns;
    let (mut mean, mut std, _) = mean_std(r.iter().copied());
    let mut flagged: Vec<bool> = vec![false; r.len()];
    for iteration in 1..=MAX_ITERATIONS {
        if !(std > 0.0) {
            return Err(Error::DegenerateSeries(
                "diffusive volatility estimate is zero".into(),
            ));
        }
        let threshold = beta * std;
        let next: Vec<bool> = r.iter().map(|&x| (x - mean).abs() > threshold).collect();
        if next.iter().all(|&f| f) {
            return Err(Error::DegenerateSeries(
                "every return was flagged as a jump".into(),
            ));
        }
        if iteration > 1 && next == flagged {
            return Ok(JumpDetection {
                sigma_hat: std / series.dt.sqrt(),
                jump_indices: flagged
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f)
                    .map(|(i, _)| i)
                    .collect(),
                mean,
                iterations: iteration,
            });
        }
        flagged = next;
        let kept = r.iter().zip(&flagged).filter(|(_, &f)| !f).map(|(&x, _)| x);
        let (m, s, n) = mean_std(kept);
        if n < 2 {
            return Err(Error::DegenerateSeries(
                "fewer than two unflagged returns".into(),
            ));
        }
        mean = m;
        std = s;
    }
    Err(Error::Estimation(format!(
        "jump filter did not converge in {MAX_ITERATIONS} iterations"
    )))
}

/// Annualized double-exponential jump-diffusion fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDiffusionFit {
    /// Uncompensated drift.
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub p_up: f64,
    /// `None` when no upward jump was detected.
    pub eta1: Option<f64>,
    /// `None` when no downward jump was detected.
    pub eta2: Option<f64>,
    pub n_jumps: usize,
    pub warnings: Vec<String>,
}

impl JumpDiffusionFit {
    /// Jump parameters, with an absent direction represented by an infinite
    /// rate (zero-size jumps).
    pub fn jump_params(&self) -> JumpParams {
        JumpParams {
            lambda: self.lambda,
            p_up: self.p_up,
            eta1: self.eta1.unwrap_or(f64::INFINITY),
            eta2: self.eta2.unwrap_or(f64::INFINITY),
        }
    }
}

pub fn fit_jump_diffusion(
    series: &ReturnSeries,
    beta: f64,
) -> Result<(JumpDiffusionFit, JumpDetection)> {
    let det = detect_jumps(series, beta)?;
    let r = &series.log_returns;
    let years = series.years();
    let magnitudes: Vec<f64> = det.jump_indices.iter().map(|&i| r[i] - det.mean).collect();
    let up: Vec<f64> = magnitudes.iter().copied().filter(|&y| y > 0.0).collect();
    let down: Vec<f64> = magnitudes
        .iter()
        .copied()
        .filter(|&y| y <= 0.0)
        .map(f64::abs)
        .collect();
    let n_jumps = magnitudes.len();
    let mut warnings = Vec::new();

    let rate = |v: &[f64]| (!v.is_empty()).then(|| v.len() as f64 / v.iter().sum::<f64>());
    let (lambda, p_up, eta1, eta2) = if n_jumps == 0 {
        (0.0, 1.0, None, None)
    } else {
        (
            n_jumps as f64 / years,
            up.len() as f64 / n_jumps as f64,
            rate(&up),
            rate(&down),
        )
    };
    if let Some(e1) = eta1 {
        if e1 <= 1.0 {
            warnings.push(format!(
                "eta1 = {e1} <= 1: upward jumps have infinite mean multiplier"
            ));
        }
    }
    let sigma = det.sigma_hat;
    let jp = JumpParams {
        lambda,
        p_up,
        eta1: eta1.unwrap_or(f64::INFINITY),
        eta2: eta2.unwrap_or(f64::INFINITY),
    };
    let kappa = if eta1.is_some_and(|e| e <= 1.0) {
        f64::NAN
    } else {
        jp.compensator().unwrap_or(f64::NAN)
    };
    let mean_all = r.iter().sum::<f64>() / r.len() as f64;
    // expected log growth per year = mu - lambda*kappa - sigma^2/2 + lambda*E[Y]
    let mu =
        mean_all / series.dt + 0.5 * sigma * sigma + lambda * kappa - lambda * jp.mean_log_jump();
    Ok((
        JumpDiffusionFit {
            mu,
            sigma,
            lambda,
            p_up,
            eta1,
            eta2,
            n_jumps,
            warnings,
        },
        det,
    ))
}

/// Maximum-likelihood geometric Brownian motion fit `(mu, sigma)`.
pub fn fit_gbm(series: &ReturnSeries) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(invalid("need at least two returns"));
    }
    let r = &series.log_returns;
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = centered_sum_sq(r.iter().copied(), mean) / n;
    let sigma = (var / series.dt).sqrt();
    Ok((mean / series.dt + 0.5 * sigma * sigma, sigma))
}

/// Sample correlation over the periods flagged in neither series.
pub fn estimate_correlation(
    s: &ReturnSeries,
    b: &ReturnSeries,
    jumps_s: &[usize],
    jumps_b: &[usize],
) -> Result<f64> {
    if s.timestamps != b.timestamps {
        return Err(Error::Data("series are not aligned".into()));
    }
    let mut excluded = vec![false; s.len()];
    for &i in jumps_s.iter().chain(jumps_b) {
        if i < excluded.len() {
            excluded[i] = true;
        }
    }
    let pairs: Vec<(f64, f64)> = s
        .log_returns
        .iter()
        .zip(&b.log_returns)
        .zip(&excluded)
        .filter(|(_, &x)| !x)
        .map(|((&a, &c), _)| (a, c))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Estimation(
            "fewer than two common non-jump periods".into(),
        ));
    }
    let n = pairs.len() as f64;
    let (ma, mb) = pairs
        .iter()
        .fold((0.0, 0.0), |(x, y), &(a, c)| (x + a / n, y + c / n));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(a, c) in &pairs {
        sab += (a - ma) * (c - mb);
        saa += (a - ma) * (a - ma);
        sbb += (c - mb) * (c - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Estimation("a series has zero variance".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Jump-diffusion and GBM fits for a stock and bond pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCalibration {
    pub market: MarketParams,
    pub stock: JumpDiffusionFit,
    pub bond: JumpDiffusionFit,
    pub stock_jumps: Vec<usize>,
    pub bond_jumps: Vec<usize>,
    /// `(mu, sigma)` of the GBM fits.
    pub gbm_stock: (f64, f64),
    pub gbm_bond: (f64, f64),
    /// Correlation over all months.
    pub gbm_rho: f64,
}

/// Threshold calibration of both series with borrowing spread `mu_c_b`.
pub fn calibrate_pair(history: &PairedHistory, beta: f64, mu_c_b: f64) -> Result<PairCalibration> {
    let (stock, det_s) = fit_jump_diffusion(&history.stock, beta)?;
    let (bond, det_b) = fit_jump_diffusion(&history.bond, beta)?;
    let rho = estimate_correlation(
        &history.stock,
        &history.bond,
        &det_s.jump_indices,
        &det_b.jump_indices,
    )?;
    let market = MarketParams {
        mu_s: stock.mu,
        sigma_s: stock.sigma,
        jump_s: stock.jump_params(),
        mu_b: bond.mu,
        sigma_b: bond.sigma,
        jump_b: bond.jump_params(),
        rho_sb: rho,
        mu_c_b,
    };
    Ok(PairCalibration {
        market,
        stock,
        bond,
        stock_jumps: det_s.jump_indices,
        bond_jumps: det_b.jump_indices,
        gbm_stock: fit_gbm(&history.stock)?,
        gbm_bond: fit_gbm(&history.bond)?,
        gbm_rho: estimate_correlation(&history.stock, &history.bond, &[], &[])?,
    })
}
