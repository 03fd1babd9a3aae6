//! Log-spaced state grid for `(s, b)` and the mirrored debt grid for `b < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Grid configuration. Amounts are in thousands of dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_y: usize,
    /// Number of equally spaced equity fractions searched at a rebalance;
    /// defaults to `n_y`.
    #[serde(default)]
    pub n_p: Option<usize>,
    /// Centre of the log grid is `ln(center)`.
    #[serde(default = "default_center")]
    pub center: f64,
    /// Half width of the grid in log units.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Fraction of each dimension appended as padding for the Fourier step.
    #[serde(default = "default_extension")]
    pub extension: f64,
}

fn default_center() -> f64 {
    100.0
}
fn default_half_width() -> f64 {
    8.0
}
fn default_extension() -> f64 {
    0.5
}

impl GridSpec {
    pub fn square(n: usize) -> Self {
        GridSpec {
            n_x: n,
            n_y: n,
            n_p: None,
            center: default_center(),
            half_width: default_half_width(),
            extension: default_extension(),
        }
    }

    pub fn controls(&self) -> usize {
        self.n_p.unwrap_or(self.n_y)
    }
}

/// Equally spaced nodes in `x = ln s` and `y = ln b`. The debt grid uses
/// the `y` nodes for `ln(-b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    pub n_x: usize,
    pub n_y: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub dx: f64,
    pub dy: f64,
}

impl StateGrid {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        if spec.n_x < 4 || spec.n_y < 4 {
            return Err(invalid("grid needs at least 4 nodes per dimension"));
        }
        if !(spec.center > 0.0 && spec.half_width > 0.0) {
            return Err(invalid("grid centre and half width must be positive"));
        }
        if !(spec.extension >= 0.0) {
            return Err(invalid("grid extension must be >= 0"));
        }
        if spec.controls() < 2 {
            return Err(invalid("need at least two candidate equity fractions"));
        }
        let c = spec.center.ln();
        let (lo, hi) = (c - spec.half_width, c + spec.half_width);
        Ok(StateGrid {
            n_x: spec.n_x,
            n_y: spec.n_y,
            x_min: lo,
            x_max: hi,
            y_min: lo,
            y_max: hi,
            dx: (hi - lo) / (spec.n_x - 1) as f64,
            dy: (hi - lo) / (spec.n_y - 1) as f64,
        })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_y + j
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bilinear interpolation of `main` at log coordinates, clamped to the
    /// grid.
    #[inline]
    pub fn interpolate(&self, main: &[f64], x: f64, y: f64) -> f64 {
        let (i, fx) = locate(x, self.x_min, self.dx, self.n_x);
        let (j, fy) = locate(y, self.y_min, self.dy, self.n_y);
        let r0 = i * self.n_y + j;
        let r1 = r0 + self.n_y;
        let v00 = main[r0];
        let v01 = main[r0 + 1];
        let v10 = main[r1];
        let v11 = main[r1 + 1];
        let a = v00 + fy * (v01 - v00);
        let b = v10 + fy * (v11 - v10);
        a + fx * (b - a)
    }

    /// Linear interpolation of the debt grid at `ln(-b)`, clamped.
    #[inline]
    pub fn interpolate_debt(&self, debt: &[f64], y: f64) -> f64 {
        let (j, f) = locate(y, self.y_min, self.dy, self.n_y);
        debt[j] + f * (debt[j + 1] - debt[j])
    }

    /// Value of a liquidated (all-debt or zero) position with wealth `w <= 0`.
    #[inline]
    pub fn debt_value(&self, debt: &[f64], w: f64) -> f64 {
        debt_guard(w);
        self.interpolate_debt(debt, (-w).ln())
    }

    pub fn check(&self, v: &ValueGrid) -> Result<()> {
        if v.main.len() != self.len() || v.debt.len() != self.n_y {
            return Err(Error::GridMismatch(format!(
                "value grid has {}+{} nodes, grid expects {}+{}",
                v.main.len(),
                v.debt.len(),
                self.len(),
                self.n_y
            )));
        }
        Ok(())
    }
}

#[inline]
fn debt_guard(w: f64) {
    debug_assert!(
        w <= 0.0 || w.is_nan(),
        "debt lookup with positive wealth {w}"
    );
}

/// Cell index and fractional offset for `v` on a uniform grid, clamped so
/// that `index + 1` is valid.
#[inline]
pub(crate) fn locate(v: f64, lo: f64, h: f64, n: usize) -> (usize, f64) {
    let t = (v - lo) / h;
    if !(t > 0.0) {
        return (0, 0.0);
    }
    let last = (n - 1) as f64;
    if t >= last {
        return (n - 2, 1.0);
    }
    let k = t as usize;
    (k, t - k as f64)
}

/// Which side of a rebalancing date a value grid describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeSide {
    /// Just before the withdrawal and rebalance at `t_n`.
    Before,
    /// Just after the withdrawal and rebalance at `t_n`.
    After,
}

/// Values on the positive `(s, b)` grid and on the debt mirror grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub main: Vec<f64>,
    pub debt: Vec<f64>,
    pub n: usize,
    pub side: TimeSide,
}

impl ValueGrid {
    pub fn filled(grid: &StateGrid, value: f64, n: usize, side: TimeSide) -> Self {
        ValueGrid {
            main: vec![value; grid.len()],
            debt: vec![value; grid.n_y],
            n,
            side,
        }
    }

    /// Node-wise evaluation of a function of wealth `s + b`.
    pub fn from_wealth_fn(
        grid: &StateGrid,
        n: usize,
        side: TimeSide,
        f: impl Fn(f64) -> f64,
    ) -> Self {
        let mut main = Vec::with_capacity(grid.len());
        for i in 0..grid.n_x {
            let s = grid.x(i).exp();
            for j in 0..grid.n_y {
                main.push(f(s + grid.y(j).exp()));
            }
        }
        let debt = (0..grid.n_y).map(|j| f(-grid.y(j).exp())).collect();
        ValueGrid {
            main,
            debt,
            n,
            side,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.main.iter().chain(&self.debt).all(|v| v.is_finite())
    }
}
