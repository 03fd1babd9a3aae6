//! Annually recalculated virtual annuity (ARVA) withdrawals with a floor
//! and a cap.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mortality::{conditional_horizon, MortalityTable};

/// Spending-rule inputs. Money is in thousands of real dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArvaConfig {
    /// Age at retirement.
    pub x0: f64,
    /// Real rate used to value the virtual annuity.
    pub r: f64,
    /// Fraction of the cohort still alive at the end of the virtual annuity.
    pub survival_fraction: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Years between withdrawals.
    pub dt: f64,
}

impl Default for ArvaConfig {
    fn default() -> Self {
        ArvaConfig {
            x0: 65.0,
            r: 0.00454,
            survival_fraction: 0.2,
            q_min: 30.0,
            q_max: 80.0,
            dt: 1.0,
        }
    }
}

impl ArvaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_min <= self.q_max) {
            return Err(invalid(format!(
                "q_min {} exceeds q_max {}",
                self.q_min, self.q_max
            )));
        }
        if !(self.survival_fraction > 0.0 && self.survival_fraction < 1.0) {
            return Err(invalid(format!(
                "survival fraction {} must lie in (0, 1)",
                self.survival_fraction
            )));
        }
        if !(self.dt > 0.0) {
            return Err(invalid(format!(
                "withdrawal interval {} must be > 0",
                self.dt
            )));
        }
        if !self.r.is_finite() {
            return Err(invalid("annuity rate must be finite"));
        }
        Ok(())
    }
}

/// Present value of a continuous unit payment stream lasting `horizon`
/// years, discounted at `r`.
pub fn annuity_factor_a(r: f64, horizon: f64) -> f64 {
    let x = r * horizon;
    if x.abs() < 1e-8 {
        horizon * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / r
    }
}

/// Simpson subintervals per year of quadrature.
pub const SUBINTERVALS_PER_YEAR: usize = 12;

/// Fraction of wealth withdrawn at `t_i`: the continuous virtual-annuity
/// payment over `[t_i, t_i + dt]` taken as a lump sum in advance, with the
/// annuity factor taken from `annuity(t')`.
///
/// Returns 1 when the remaining horizon runs out inside the interval.
pub fn lump_sum_fraction_with<F>(
    annuity: F,
    r: f64,
    t_i: f64,
    dt: f64,
    subintervals: usize,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let a0 = annuity(t_i)?;
    if !(a0 > 0.0) {
        return Err(Error::DegenerateAnnuity { t: t_i });
    }
    let n = subintervals.max(2).next_multiple_of(2);
    let h = dt / n as f64;
    let mut sum = 0.0;
    for k in 0..=n {
        let t = t_i + k as f64 * h;
        let a = match annuity(t) {
            Ok(a) if a > 0.0 => a,
            // the virtual annuity is exhausted before the next withdrawal
            Ok(_) | Err(Error::Domain(_)) => return Ok(1.0),
            Err(e) => return Err(e),
        };
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += weight * (-r * (t - t_i)).exp() / a;
    }
    Ok((sum * h / 3.0).min(1.0))
}

/// Agreement required between successive subinterval doublings.
pub const QUADRATURE_TOLERANCE: f64 = 1e-7;

/// `A(t_i)` for the mortality-driven horizon of `cfg`.
///
/// Starts from monthly Simpson subintervals and doubles them until two
/// successive estimates agree to [`QUADRATURE_TOLERANCE`]. The integrand has
/// kinks wherever the horizon crosses an integer age.
pub fn lump_sum_fraction(cfg: &ArvaConfig, table: &MortalityTable, t_i: f64) -> Result<f64> {
    let annuity = |t| remaining_annuity_factor(cfg, table, t);
    let mut n =
        ((cfg.dt * SUBINTERVALS_PER_YEAR as f64).ceil() as usize).max(SUBINTERVALS_PER_YEAR);
    let mut a = lump_sum_fraction_with(annuity, cfg.r, t_i, cfg.dt, n)?;
    for _ in 0..10 {
        n *= 2;
        let finer = lump_sum_fraction_with(annuity, cfg.r, t_i, cfg.dt, n)?;
        let done = (finer - a).abs() < QUADRATURE_TOLERANCE;
        a = finer;
        if done {
            break;
        }
    }
    Ok(a)
}

fn remaining_annuity_factor(cfg: &ArvaConfig, table: &MortalityTable, t: f64) -> Result<f64> {
    let horizon = conditional_horizon(table, cfg.x0, t, cfg.survival_fraction)? - t;
    Ok(annuity_factor_a(cfg.r, horizon))
}

/// Bounded ARVA withdrawal for pre-withdrawal wealth `w_minus`.
pub fn arva_withdrawal(w_minus: f64, a: f64, q_min: f64, q_max: f64) -> f64 {
    q_min.max((a * w_minus).min(q_max))
}

/// Withdrawal schedule for dates `t_0 .. t_M`: the fractions `A(t_n)` and
/// the floor and cap. A constant withdrawal is the case `q_min == q_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithdrawalRule {
    pub fractions: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
}

impl WithdrawalRule {
    /// ARVA schedule for `m + 1` dates spaced `cfg.dt` apart.
    pub fn arva(cfg: &ArvaConfig, table: &MortalityTable, m: usize) -> Result<Self> {
        cfg.validate()?;
        let fractions = (0..=m)
            .map(|n| lump_sum_fraction(cfg, table, n as f64 * cfg.dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(WithdrawalRule {
            fractions,
            q_min: cfg.q_min,
            q_max: cfg.q_max,
        })
    }

    /// The same amount `q` at each of `m + 1` dates.
    pub fn constant(q: f64, m: usize) -> Self {
        WithdrawalRule {
            fractions: vec![0.0; m + 1],
            q_min: q,
            q_max: q,
        }
    }

    pub fn dates(&self) -> usize {
        self.fractions.len()
    }

    #[inline]
    pub fn withdrawal(&self, n: usize, w_minus: f64) -> f64 {
        arva_withdrawal(w_minus, self.fractions[n], self.q_min, self.q_max)
    }
}

/// Writes the schedule as `n,t,age,horizon,fraction` rows, where `horizon`
/// is the remaining term of the virtual annuity.
pub fn write_schedule_csv<W: std::io::Write>(
    cfg: &ArvaConfig,
    table: &MortalityTable,
    m: usize,
    out: W,
) -> Result<()> {
    cfg.validate()?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["n", "t", "age", "horizon", "fraction"])?;
    for n in 0..=m {
        let t = n as f64 * cfg.dt;
        let horizon = conditional_horizon(table, cfg.x0, t, cfg.survival_fraction)? - t;
        let a = lump_sum_fraction(cfg, table, t)?;
        wr.write_record([
            n.to_string(),
            t.to_string(),
            (cfg.x0 + t).to_string(),
            horizon.to_string(),
            a.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
