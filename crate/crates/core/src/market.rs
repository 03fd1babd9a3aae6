//! Bivariate jump-diffusion market: a stock index and a constant-maturity
//! bond index, each with double-exponential log-jumps, correlated diffusive
//! parts and mutually independent jump parts.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Double-exponential jump component: Poisson arrivals with intensity
/// `lambda`, log-jump `y` distributed as
/// `p_up * eta1 * exp(-eta1 y) 1{y >= 0} + (1 - p_up) * eta2 * exp(eta2 y) 1{y < 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpParams {
    pub lambda: f64,
    pub p_up: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl JumpParams {
    /// A jump component that never fires.
    pub fn none() -> Self {
        JumpParams {
            lambda: 0.0,
            p_up: 1.0,
            eta1: f64::INFINITY,
            eta2: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!(
                "jump intensity {} must be finite and >= 0",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.p_up) {
            return Err(invalid(format!("p_up {} must lie in [0, 1]", self.p_up)));
        }
        if !(self.eta1 > 1.0) {
            return Err(Error::InfiniteMean { eta1: self.eta1 });
        }
        if !(self.eta2 > 0.0) {
            return Err(invalid(format!("eta2 {} must be > 0", self.eta2)));
        }
        Ok(())
    }

    /// `E[exp(Y) - 1]` for one jump.
    pub fn compensator(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.compensator_unchecked())
    }

    fn compensator_unchecked(&self) -> f64 {
        let up = if self.eta1.is_infinite() {
            self.p_up
        } else {
            self.p_up * self.eta1 / (self.eta1 - 1.0)
        };
        let down = if self.eta2.is_infinite() {
            1.0 - self.p_up
        } else {
            (1.0 - self.p_up) * self.eta2 / (self.eta2 + 1.0)
        };
        up + down - 1.0
    }

    /// `E[Y]` for one log-jump.
    pub fn mean_log_jump(&self) -> f64 {
        let up = if self.eta1.is_infinite() {
            0.0
        } else {
            self.p_up / self.eta1
        };
        let down = if self.eta2.is_infinite() {
            0.0
        } else {
            (1.0 - self.p_up) / self.eta2
        };
        up - down
    }

    /// Characteristic function `E[exp(i w Y)]` of one log-jump.
    pub fn log_jump_characteristic(&self, omega: f64) -> Complex64 {
        let i_omega = Complex64::new(0.0, omega);
        let up = if self.eta1.is_infinite() {
            Complex64::new(self.p_up, 0.0)
        } else {
            self.p_up * self.eta1 / (self.eta1 - i_omega)
        };
        let down = if self.eta2.is_infinite() {
            Complex64::new(1.0 - self.p_up, 0.0)
        } else {
            (1.0 - self.p_up) * self.eta2 / (self.eta2 + i_omega)
        };
        up + down
    }

    fn sample_log_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let e: f64 = Exp1.sample(rng);
        if u < self.p_up {
            e / self.eta1
        } else {
            -e / self.eta2
        }
    }
}

/// Returns `E[xi - 1]` for the jump multiplier `xi = exp(Y)`.
pub fn jump_compensator(jp: &JumpParams) -> Result<f64> {
    jp.compensator()
}

/// Real (inflation-adjusted) market parameters, annualized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub mu_s: f64,
    pub sigma_s: f64,
    pub jump_s: JumpParams,
    pub mu_b: f64,
    pub sigma_b: f64,
    pub jump_b: JumpParams,
    pub rho_sb: f64,
    /// Extra drift paid on debt (negative bond holdings).
    pub mu_c_b: f64,
}

impl MarketParams {
    /// Threshold-estimated parameters for the real CRSP value-weighted index
    /// and 30-day T-bill index, 1926:1 to 2018:12, with a 2% borrowing spread.
    pub fn crsp_1926_2018() -> Self {
        MarketParams {
            mu_s: 0.08607,
            sigma_s: 0.14600,
            jump_s: JumpParams {
                lambda: 0.32258,
                p_up: 0.23333,
                eta1: 4.3578,
                eta2: 5.5089,
            },
            mu_b: 0.00454,
            sigma_b: 0.01301,
            jump_b: JumpParams {
                lambda: 0.51610,
                p_up: 0.39580,
                eta1: 65.875,
                eta2: 57.737,
            },
            rho_sb: 0.08311,
            mu_c_b: 0.02,
        }
    }

    /// Market with no drift, volatility or jumps: every gross return is 1.
    pub fn frozen() -> Self {
        MarketParams {
            mu_s: 0.0,
            sigma_s: 0.0,
            jump_s: JumpParams::none(),
            mu_b: 0.0,
            sigma_b: 0.0,
            jump_b: JumpParams::none(),
            rho_sb: 0.0,
            mu_c_b: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.jump_s.validate()?;
        self.jump_b.validate()?;
        for (name, v) in [("mu_s", self.mu_s), ("mu_b", self.mu_b)] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if !(self.sigma_s >= 0.0) || !(self.sigma_b >= 0.0) {
            return Err(invalid("volatilities must be >= 0"));
        }
        if !(self.rho_sb.abs() <= 1.0) {
            return Err(invalid(format!(
                "rho_sb {} must lie in [-1, 1]",
                self.rho_sb
            )));
        }
        if !(self.mu_c_b >= 0.0) {
            return Err(invalid(format!(
                "borrowing spread {} must be >= 0",
                self.mu_c_b
            )));
        }
        Ok(())
    }

    /// Drift of the stock log-price per year, `mu - lambda*kappa - sigma^2/2`.
    pub fn log_drift_s(&self) -> f64 {
        self.mu_s
            - self.jump_s.lambda * self.jump_s.compensator_unchecked()
            - 0.5 * self.sigma_s * self.sigma_s
    }

    /// Drift of the bond log-price per year (lending side, no spread).
    pub fn log_drift_b(&self) -> f64 {
        self.mu_b
            - self.jump_b.lambda * self.jump_b.compensator_unchecked()
            - 0.5 * self.sigma_b * self.sigma_b
    }
}

/// Gross real returns of the two indexes over one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodReturns {
    pub r_s: f64,
    pub r_b: f64,
}

/// Exact sampler of one-interval log returns for validated parameters.
#[derive(Debug, Clone)]
pub struct ReturnSampler {
    params: MarketParams,
    dt: f64,
    drift_s: f64,
    drift_b: f64,
    vol_s: f64,
    vol_b: f64,
    rho_comp: f64,
    poisson_s: Option<Poisson<f64>>,
    poisson_b: Option<Poisson<f64>>,
}

impl ReturnSampler {
    pub fn new(params: &MarketParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0) {
            return Err(invalid(format!("interval dt = {dt} must be > 0")));
        }
        let poisson = |jp: &JumpParams| -> Result<Option<Poisson<f64>>> {
            let mean = jp.lambda * dt;
            if mean > 0.0 {
                Poisson::new(mean)
                    .map(Some)
                    .map_err(|e| invalid(format!("poisson mean {mean}: {e}")))
            } else {
                Ok(None)
            }
        };
        Ok(ReturnSampler {
            params: *params,
            dt,
            drift_s: params.log_drift_s() * dt,
            drift_b: params.log_drift_b() * dt,
            vol_s: params.sigma_s * dt.sqrt(),
            vol_b: params.sigma_b * dt.sqrt(),
            rho_comp: (1.0 - params.rho_sb * params.rho_sb).max(0.0).sqrt(),
            poisson_s: poisson(&params.jump_s)?,
            poisson_b: poisson(&params.jump_b)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Log returns `(log r_s, log r_b)` over one interval.
    pub fn sample_log<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let zs = z1;
        let zb = self.params.rho_sb * z1 + self.rho_comp * z2;
        let mut ls = self.drift_s + self.vol_s * zs;
        let mut lb = self.drift_b + self.vol_b * zb;
        if let Some(p) = &self.poisson_s {
            let n = p.sample(rng) as u64;
            for _ in 0..n {
                ls += self.params.jump_s.sample_log_jump(rng);
            }
        }
        if let Some(p) = &self.poisson_b {
            let n = p.sample(rng) as u64;
            for _ in 0..n {
                lb += self.params.jump_b.sample_log_jump(rng);
            }
        }
        (ls, lb)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PeriodReturns {
        let (ls, lb) = self.sample_log(rng);
        PeriodReturns {
            r_s: ls.exp(),
            r_b: lb.exp(),
        }
    }

    /// Number of stock jumps in one interval; exposed for tests of the
    /// arrival process.
    pub fn sample_stock_jump_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.poisson_s.as_ref().map_or(0, |p| p.sample(rng) as u64)
    }
}

/// Samples gross returns of both indexes over `dt` years.
pub fn sample_period_returns<R: Rng + ?Sized>(
    params: &MarketParams,
    dt: f64,
    rng: &mut R,
) -> Result<PeriodReturns> {
    Ok(ReturnSampler::new(params, dt)?.sample(rng))
}

/// Characteristic function `E[exp(i (w_s X_s + w_b X_b))]` of the joint
/// log-return vector over `dt` (no borrowing spread).
pub fn joint_log_characteristic(
    params: &MarketParams,
    dt: f64,
    omega_s: f64,
    omega_b: f64,
) -> Complex64 {
    joint_log_characteristic_exponent(params, omega_s, omega_b)
        .scale(dt)
        .exp()
}

/// Per-year characteristic exponent of the joint log-return vector.
pub(crate) fn joint_log_characteristic_exponent(
    params: &MarketParams,
    omega_s: f64,
    omega_b: f64,
) -> Complex64 {
    let (ss, sb, rho) = (params.sigma_s, params.sigma_b, params.rho_sb);
    let quad = ss * ss * omega_s * omega_s
        + 2.0 * rho * ss * sb * omega_s * omega_b
        + sb * sb * omega_b * omega_b;
    let mut psi = Complex64::new(
        -0.5 * quad,
        omega_s * params.log_drift_s() + omega_b * params.log_drift_b(),
    );
    if params.jump_s.lambda > 0.0 {
        psi += params.jump_s.lambda * (params.jump_s.log_jump_characteristic(omega_s) - 1.0);
    }
    if params.jump_b.lambda > 0.0 {
        psi += params.jump_b.lambda * (params.jump_b.log_jump_characteristic(omega_b) - 1.0);
    }
    psi
}

/// Deterministic per-path random stream. Streams for distinct paths are
/// independent and do not depend on the order in which paths are run.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_compensator(jp: &JumpParams) -> f64 {
        // midpoint rule on each exponential branch, substituting u = eta*y
        let n = 200_000;
        let upper = 60.0;
        let h = upper / n as f64;
        let mut up = 0.0;
        let mut down = 0.0;
        for k in 0..n {
            let u = (k as f64 + 0.5) * h;
            up += ((u / jp.eta1).exp() - 1.0) * (-u).exp() * h;
            down += ((-u / jp.eta2).exp() - 1.0) * (-u).exp() * h;
        }
        jp.p_up * up + (1.0 - jp.p_up) * down
    }

    #[test]
    fn compensator_matches_quadrature() {
        let m = MarketParams::crsp_1926_2018();
        for jp in [m.jump_s, m.jump_b] {
            let closed = jp.compensator().unwrap();
            let numeric = quad_compensator(&jp);
            assert!((closed - numeric).abs() < 1e-7, "{closed} vs {numeric}");
        }
        assert!((m.jump_s.compensator().unwrap() - (-0.04830)).abs() < 5e-5);
        assert!((m.jump_b.compensator().unwrap() - (-0.004185)).abs() < 5e-6);
    }

    #[test]
    fn degenerate_jump_has_zero_compensator() {
        assert_eq!(JumpParams::none().compensator().unwrap(), 0.0);
        let jp = JumpParams {
            lambda: 1.0,
            p_up: 1.0,
            eta1: 1e12,
            eta2: 3.0,
        };
        assert!(jp.compensator().unwrap().abs() < 1e-11);
    }

    #[test]
    fn infinite_mean_rejected() {
        let jp = JumpParams {
            lambda: 1.0,
            p_up: 0.5,
            eta1: 1.0,
            eta2: 3.0,
        };
        assert!(matches!(jp.compensator(), Err(Error::InfiniteMean { .. })));
    }

    #[test]
    fn deterministic_drift() {
        let mut m = MarketParams::frozen();
        m.mu_s = 0.08;
        let mut rng = path_rng(1, 0);
        let r = sample_period_returns(&m, 1.0, &mut rng).unwrap();
        assert_eq!(r.r_s, 0.08f64.exp());
        assert_eq!(r.r_b, 1.0);
    }

    #[test]
    fn characteristic_at_origin_is_one() {
        let m = MarketParams::crsp_1926_2018();
        assert_eq!(
            joint_log_characteristic(&m, 1.0, 0.0, 0.0),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn characteristic_jump_free_is_gaussian() {
        let mut m = MarketParams::crsp_1926_2018();
        m.jump_s = JumpParams::none();
        m.jump_b = JumpParams::none();
        let dt = 0.5;
        let (ws, wb) = (1.3, -2.1);
        let ms = (m.mu_s - 0.5 * m.sigma_s * m.sigma_s) * dt;
        let mb = (m.mu_b - 0.5 * m.sigma_b * m.sigma_b) * dt;
        let var = (m.sigma_s * m.sigma_s * ws * ws
            + 2.0 * m.rho_sb * m.sigma_s * m.sigma_b * ws * wb
            + m.sigma_b * m.sigma_b * wb * wb)
            * dt;
        let expected = Complex64::new(-0.5 * var, ws * ms + wb * mb).exp();
        let got = joint_log_characteristic(&m, dt, ws, wb);
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn streams_are_reproducible() {
        let m = MarketParams::crsp_1926_2018();
        let s = ReturnSampler::new(&m, 1.0).unwrap();
        let a: Vec<_> = (0..10).map(|_| s.sample(&mut path_rng(9, 3))).collect();
        let b: Vec<_> = (0..10).map(|_| s.sample(&mut path_rng(9, 3))).collect();
        assert_eq!(a, b);
        let c = s.sample(&mut path_rng(9, 4));
        assert_ne!(a[0], c);
    }

    #[test]
    fn rejects_bad_params() {
        let mut m = MarketParams::crsp_1926_2018();
        m.rho_sb = 1.5;
        assert!(m.validate().is_err());
        let mut m = MarketParams::crsp_1926_2018();
        m.mu_c_b = -0.01;
        assert!(m.validate().is_err());
        assert!(ReturnSampler::new(&MarketParams::crsp_1926_2018(), 0.0).is_err());
    }
}
