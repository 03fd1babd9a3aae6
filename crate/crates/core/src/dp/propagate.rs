//! Conditional expectation over one period between rebalancing dates.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dp::grid::{StateGrid, ValueGrid};
use crate::error::{invalid, Result};
use crate::market::{JumpParams, MarketParams};

/// Maps values at `t_{n+1}^-` to values at `t_n^+`.
pub trait Propagator: Send + Sync {
    fn grid(&self) -> &StateGrid;

    /// Propagates every grid in `values` in place.
    fn propagate(&self, values: &mut [ValueGrid]) -> Result<()>;
}

/// Convolution with the transition density projected onto piecewise-linear
/// basis functions, applied in Fourier space on a padded periodic grid.
///
/// Projection onto hat functions makes the weights non-negative up to the
/// truncation of the folded frequency sums, so kinks in the value function do
/// not ring.
pub struct FourierPropagator {
    grid: StateGrid,
    ext_x: usize,
    ext_y: usize,
    /// Multiplier stored as `[ky][kx]`, scaled by the inverse transform size.
    multiplier: Vec<Complex64>,
    debt_multiplier: Vec<Complex64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

// Folded terms below this size are dropped.
const FOLD_CUTOFF: f64 = 1e-17;
const MAX_FOLDS: usize = 512;

/// One dimension of the log-return process between dates.
#[derive(Debug, Clone, Copy)]
struct Marginal {
    sigma: f64,
    /// Per-year drift of the log process.
    drift: f64,
    jump: JumpParams,
}

impl Marginal {
    /// `dt` times the characteristic exponent without the correlation term.
    fn exponent(&self, omega: f64, dt: f64) -> Complex64 {
        let mut psi = Complex64::new(
            -0.5 * self.sigma * self.sigma * omega * omega,
            omega * self.drift,
        );
        if self.jump.lambda > 0.0 {
            psi += self.jump.lambda * (self.jump.log_jump_characteristic(omega) - 1.0);
        }
        psi * dt
    }

    /// Number of frequency folds on each side needed for the envelope
    /// `exp(-sigma_eff^2 w^2 dt / 2) sinc^2(w h / 2)` to drop below the cutoff.
    fn folds(&self, h: f64, dt: f64, shrink: f64) -> usize {
        let s2 = self.sigma * self.sigma * dt * shrink;
        let pi_h = std::f64::consts::PI / h;
        for r in 0..MAX_FOLDS {
            let w = (2 * r + 1) as f64 * pi_h;
            let env = (-0.5 * s2 * w * w).exp() * (4.0 / (w * h * w * h)).min(1.0);
            if env < FOLD_CUTOFF {
                return r;
            }
        }
        MAX_FOLDS
    }
}

#[inline]
fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// Angular frequency of DFT index `k` on `n` points of spacing `h`.
#[inline]
fn omega(k: usize, n: usize, h: f64) -> f64 {
    let k = if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * k / (n as f64 * h)
}

/// DFT multiplier of hat weights for a deterministic shift `a`.
fn shift_factor(theta: f64, a: f64, h: f64) -> Complex64 {
    let u = a / h;
    let j = u.floor();
    let f = u - j;
    Complex64::from_polar(1.0, theta * j)
        * (Complex64::new(1.0 - f, 0.0) + f * Complex64::from_polar(1.0, theta))
}

/// Folded one-dimensional multiplier `sum_r phi(w_k + 2 pi r / h) sinc^2(.)`.
fn fold_1d(m: &Marginal, n: usize, h: f64, dt: f64) -> Vec<Complex64> {
    let two_pi_h = 2.0 * std::f64::consts::PI / h;
    if m.sigma > 0.0 {
        let folds = m.folds(h, dt, 1.0) as i64;
        return (0..n)
            .map(|k| {
                let w0 = omega(k, n, h);
                (-folds..=folds)
                    .map(|r| {
                        let w = w0 + r as f64 * two_pi_h;
                        m.exponent(w, dt).exp() * sinc2(0.5 * w * h)
                    })
                    .sum()
            })
            .collect();
    }
    // No diffusion: the no-jump atom is a pure shift with a closed-form fold,
    // and the remainder decays with frequency.
    let atom = (-m.jump.lambda * dt).exp();
    let shift = m.drift * dt;
    let folds = if m.jump.lambda > 0.0 {
        MAX_FOLDS as i64
    } else {
        0
    };
    (0..n)
        .map(|k| {
            let w0 = omega(k, n, h);
            let mut sum = atom * shift_factor(w0 * h, shift, h);
            for r in -folds..=folds {
                if folds == 0 {
                    break;
                }
                let w = w0 + r as f64 * two_pi_h;
                let rest = m.exponent(w, dt).exp() - atom * Complex64::from_polar(1.0, w * shift);
                sum += rest * sinc2(0.5 * w * h);
            }
            sum
        })
        .collect()
}

/// Replaces `m` by its Hermitian part so that real inputs stay real.
fn hermitian_1d(m: &mut [Complex64]) {
    let n = m.len();
    let orig = m.to_vec();
    for k in 0..n {
        m[k] = 0.5 * (orig[k] + orig[(n - k) % n].conj());
    }
}

fn hermitian_2d(m: &mut [Complex64], nx: usize, ny: usize) {
    // layout [ky][kx]
    let orig = m.to_vec();
    for ky in 0..ny {
        for kx in 0..nx {
            let partner = ((ny - ky) % ny) * nx + (nx - kx) % nx;
            m[ky * nx + kx] = 0.5 * (orig[ky * nx + kx] + orig[partner].conj());
        }
    }
}

/// Smallest `n' >= n` whose only prime factors are 2, 3 and 5.
fn smooth_size(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .unwrap()
}

/// Index of the source node used for padded position `e` of an `n`-node
/// dimension extended to `ext` nodes: padding copies the nearer edge.
#[inline]
fn source_index(e: usize, n: usize, ext: usize) -> usize {
    if e < n {
        e
    } else if e - (n - 1) <= ext - e {
        n - 1
    } else {
        0
    }
}

impl FourierPropagator {
    pub fn new(grid: &StateGrid, market: &MarketParams, dt: f64, extension: f64) -> Result<Self> {
        market.validate()?;
        if !(dt > 0.0) {
            return Err(invalid(format!("period length {dt} must be positive")));
        }
        if !(extension >= 0.0) {
            return Err(invalid("grid extension must be >= 0"));
        }
        let ext_x = smooth_size(grid.n_x + (extension * grid.n_x as f64).ceil() as usize);
        let ext_y = smooth_size(grid.n_y + (extension * grid.n_y as f64).ceil() as usize);
        let stock = Marginal {
            sigma: market.sigma_s,
            drift: market.log_drift_s(),
            jump: market.jump_s,
        };
        let bond = Marginal {
            sigma: market.sigma_b,
            drift: market.log_drift_b(),
            jump: market.jump_b,
        };
        let debt = Marginal {
            drift: market.log_drift_b() + market.mu_c_b,
            ..bond
        };

        let cross = market.rho_sb * market.sigma_s * market.sigma_b;
        let mut multiplier = vec![Complex64::new(0.0, 0.0); ext_x * ext_y];
        if cross == 0.0 {
            let fx = fold_1d(&stock, ext_x, grid.dx, dt);
            let fy = fold_1d(&bond, ext_y, grid.dy, dt);
            for ky in 0..ext_y {
                for kx in 0..ext_x {
                    multiplier[ky * ext_x + kx] = fx[kx] * fy[ky];
                }
            }
        } else {
            // both volatilities are positive here
            let shrink = 1.0 - market.rho_sb.abs();
            let shrink = if shrink > 0.0 { shrink } else { 1.0 };
            let rx = stock.folds(grid.dx, dt, shrink) as i64;
            let ry = bond.folds(grid.dy, dt, shrink) as i64;
            let terms =
                |n: usize, h: f64, folds: i64, m: &Marginal| -> Vec<Vec<(f64, Complex64)>> {
                    (0..n)
                        .map(|k| {
                            let w0 = omega(k, n, h);
                            (-folds..=folds)
                                .map(|r| {
                                    let w = w0 + r as f64 * 2.0 * std::f64::consts::PI / h;
                                    (w, m.exponent(w, dt).exp() * sinc2(0.5 * w * h))
                                })
                                .collect()
                        })
                        .collect()
                };
            let tx = terms(ext_x, grid.dx, rx, &stock);
            let ty = terms(ext_y, grid.dy, ry, &bond);
            for ky in 0..ext_y {
                for kx in 0..ext_x {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for &(wy, ey) in &ty[ky] {
                        let mut inner = Complex64::new(0.0, 0.0);
                        for &(wx, ex) in &tx[kx] {
                            inner += ex * (-dt * cross * wx * wy).exp();
                        }
                        sum += inner * ey;
                    }
                    multiplier[ky * ext_x + kx] = sum;
                }
            }
        }
        hermitian_2d(&mut multiplier, ext_x, ext_y);
        let scale = 1.0 / (ext_x * ext_y) as f64;
        multiplier.iter_mut().for_each(|m| *m *= scale);

        let mut debt_multiplier = fold_1d(&debt, ext_y, grid.dy, dt);
        hermitian_1d(&mut debt_multiplier);
        let scale = 1.0 / ext_y as f64;
        debt_multiplier.iter_mut().for_each(|m| *m *= scale);

        let mut planner = FftPlanner::new();
        Ok(FourierPropagator {
            grid: grid.clone(),
            ext_x,
            ext_y,
            multiplier,
            debt_multiplier,
            fft_x: planner.plan_fft_forward(ext_x),
            ifft_x: planner.plan_fft_inverse(ext_x),
            fft_y: planner.plan_fft_forward(ext_y),
            ifft_y: planner.plan_fft_inverse(ext_y),
        })
    }

    /// Padded transform sizes `(x, y)`.
    pub fn extended_size(&self) -> (usize, usize) {
        (self.ext_x, self.ext_y)
    }

    /// Propagates `a.main + i b.main` in one complex transform.
    fn main_pair(&self, a: &mut [f64], b: Option<&mut [f64]>) {
        let (nx, ny) = (self.grid.n_x, self.grid.n_y);
        let (ex, ey) = (self.ext_x, self.ext_y);
        let zero = Complex64::new(0.0, 0.0);

        // rows in y, padded, for the nx stored rows
        let mut rows = vec![zero; nx * ey];
        let b_ref = b.as_deref();
        for i in 0..nx {
            let row = &mut rows[i * ey..(i + 1) * ey];
            for (e, slot) in row.iter_mut().enumerate() {
                let j = source_index(e, ny, ey);
                let im = b_ref.map_or(0.0, |b| b[i * ny + j]);
                *slot = Complex64::new(a[i * ny + j], im);
            }
        }
        let mut scratch = vec![
            zero;
            self.fft_y
                .get_inplace_scratch_len()
                .max(self.fft_x.get_inplace_scratch_len())
        ];
        self.fft_y.process_with_scratch(&mut rows, &mut scratch);

        // transpose to [ky][x], padding in x by edge rows
        let mut cols = vec![zero; ey * ex];
        for ky in 0..ey {
            let col = &mut cols[ky * ex..(ky + 1) * ex];
            for (e, slot) in col.iter_mut().enumerate() {
                *slot = rows[source_index(e, nx, ex) * ey + ky];
            }
        }
        self.fft_x.process_with_scratch(&mut cols, &mut scratch);
        for (c, m) in cols.iter_mut().zip(&self.multiplier) {
            *c *= m;
        }
        let mut scratch_i = vec![
            zero;
            self.ifft_x
                .get_inplace_scratch_len()
                .max(self.ifft_y.get_inplace_scratch_len())
        ];
        self.ifft_x.process_with_scratch(&mut cols, &mut scratch_i);

        for i in 0..nx {
            for ky in 0..ey {
                rows[i * ey + ky] = cols[ky * ex + i];
            }
        }
        self.ifft_y.process_with_scratch(&mut rows, &mut scratch_i);

        let mut b = b;
        for i in 0..nx {
            for j in 0..ny {
                let v = rows[i * ey + j];
                a[i * ny + j] = v.re;
                if let Some(b) = b.as_deref_mut() {
                    b[i * ny + j] = v.im;
                }
            }
        }
    }

    fn debt_pair(&self, a: &mut [f64], b: Option<&mut [f64]>) {
        let (ny, ey) = (self.grid.n_y, self.ext_y);
        let b_ref = b.as_deref();
        let mut buf: Vec<Complex64> = (0..ey)
            .map(|e| {
                let j = source_index(e, ny, ey);
                Complex64::new(a[j], b_ref.map_or(0.0, |b| b[j]))
            })
            .collect();
        self.fft_y.process(&mut buf);
        for (c, m) in buf.iter_mut().zip(&self.debt_multiplier) {
            *c *= m;
        }
        self.ifft_y.process(&mut buf);
        let mut b = b;
        for j in 0..ny {
            a[j] = buf[j].re;
            if let Some(b) = b.as_deref_mut() {
                b[j] = buf[j].im;
            }
        }
    }
}

impl Propagator for FourierPropagator {
    fn grid(&self) -> &StateGrid {
        &self.grid
    }

    fn propagate(&self, values: &mut [ValueGrid]) -> Result<()> {
        for v in values.iter() {
            self.grid.check(v)?;
        }
        for pair in values.chunks_mut(2) {
            let (first, rest) = pair.split_first_mut().unwrap();
            let second = rest.first_mut();
            match second {
                Some(s) => {
                    self.main_pair(&mut first.main, Some(&mut s.main));
                    self.debt_pair(&mut first.debt, Some(&mut s.debt));
                    s.side = crate::dp::grid::TimeSide::After;
                    s.n = s.n.saturating_sub(1);
                }
                None => {
                    self.main_pair(&mut first.main, None);
                    self.debt_pair(&mut first.debt, None);
                }
            }
            first.side = crate::dp::grid::TimeSide::After;
            first.n = first.n.saturating_sub(1);
        }
        Ok(())
    }
}

/// One outcome of a discrete return lattice, in whole grid steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeOutcome {
    pub prob: f64,
    pub shift_x: i64,
    pub shift_y: i64,
    /// Shift of `ln(-b)` on the debt grid.
    pub shift_debt: i64,
}

/// Finite-outcome transition that moves values by whole grid steps,
/// clamping at the boundary. Used as an exact reference in tests.
pub struct LatticePropagator {
    grid: StateGrid,
    outcomes: Vec<LatticeOutcome>,
}

impl LatticePropagator {
    pub fn new(grid: &StateGrid, outcomes: Vec<LatticeOutcome>) -> Result<Self> {
        let total: f64 = outcomes.iter().map(|o| o.prob).sum();
        if outcomes.iter().any(|o| !(o.prob >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "lattice probabilities must be non-negative and sum to 1",
            ));
        }
        Ok(LatticePropagator {
            grid: grid.clone(),
            outcomes,
        })
    }
}

#[inline]
fn shifted(i: usize, s: i64, n: usize) -> usize {
    (i as i64 + s).clamp(0, n as i64 - 1) as usize
}

impl Propagator for LatticePropagator {
    fn grid(&self) -> &StateGrid {
        &self.grid
    }

    fn propagate(&self, values: &mut [ValueGrid]) -> Result<()> {
        let g = &self.grid;
        for v in values.iter_mut() {
            g.check(v)?;
            let mut main = vec![0.0; g.len()];
            let mut debt = vec![0.0; g.n_y];
            for o in &self.outcomes {
                for i in 0..g.n_x {
                    let si = shifted(i, o.shift_x, g.n_x);
                    for j in 0..g.n_y {
                        main[i * g.n_y + j] +=
                            o.prob * v.main[si * g.n_y + shifted(j, o.shift_y, g.n_y)];
                    }
                }
                for (j, d) in debt.iter_mut().enumerate() {
                    *d += o.prob * v.debt[shifted(j, o.shift_debt, g.n_y)];
                }
            }
            v.main = main;
            v.debt = debt;
            v.side = crate::dp::grid::TimeSide::After;
            v.n = v.n.saturating_sub(1);
        }
        Ok(())
    }
}
