//! Withdrawal and exhaustive equity-fraction search at a rebalancing date.

use serde::{Deserialize, Serialize};

use crate::arva::WithdrawalRule;
use crate::dp::grid::{locate, StateGrid, TimeSide, ValueGrid};

/// Quantity carried by a value grid through the backward recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    /// `sum q + kappa (W* + min(W_T - W*, 0) / alpha) + epsilon W_T`.
    Objective,
    /// `sum q`.
    Withdrawals,
    /// `W* + min(W_T - W*, 0) / alpha`.
    Shortfall,
    /// `W_T`.
    Wealth,
}

impl Component {
    pub fn adds_withdrawal(self) -> bool {
        matches!(self, Component::Objective | Component::Withdrawals)
    }
}

/// Post-withdrawal wealth nodes and chosen equity fractions at one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSlice {
    pub n: usize,
    pub t: f64,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
}

impl ControlSlice {
    /// Linear interpolation in `w`, clamped at both ends; zero for `w <= 0`.
    pub fn control(&self, w: f64) -> f64 {
        if !(w > 0.0) || self.w.is_empty() {
            return 0.0;
        }
        let k = self.w.partition_point(|&x| x <= w);
        let p = if k == 0 {
            self.p[0]
        } else if k == self.w.len() {
            self.p[k - 1]
        } else {
            let (w0, w1) = (self.w[k - 1], self.w[k]);
            let f = (w - w0) / (w1 - w0);
            self.p[k - 1] + f * (self.p[k] - self.p[k - 1])
        };
        p.clamp(0.0, 1.0)
    }

    /// Adds an exactly computed node, keeping `w` sorted.
    pub fn insert(&mut self, w: f64, p: f64) {
        let k = self.w.partition_point(|&x| x < w);
        if k < self.w.len() && self.w[k] == w {
            self.p[k] = p;
        } else {
            self.w.insert(k, w);
            self.p.insert(k, p);
        }
    }
}

/// Candidate equity fractions and the post-withdrawal wealth grid used for
/// the search.
pub struct ControlSearch<'a> {
    grid: &'a StateGrid,
    /// `(ln p, ln(1 - p))` for each candidate.
    log_fractions: Vec<(f64, f64)>,
    fractions: Vec<f64>,
    u_min: f64,
    du: f64,
    n_w: usize,
}

/// Relative margin by which a larger fraction must win a comparison.
const TIE_TOLERANCE: f64 = 1e-12;

impl<'a> ControlSearch<'a> {
    pub fn new(grid: &'a StateGrid, n_p: usize) -> Self {
        let fractions: Vec<f64> = (0..n_p).map(|m| m as f64 / (n_p - 1) as f64).collect();
        let log_fractions = fractions
            .iter()
            .map(|&p| (p.ln(), (1.0 - p).ln()))
            .collect();
        let du = 0.5 * grid.dy;
        let n_w = 2 * (grid.n_y - 1) + 1;
        ControlSearch {
            grid,
            log_fractions,
            fractions,
            u_min: grid.y_min,
            du,
            n_w,
        }
    }

    pub fn wealth_nodes(&self) -> Vec<f64> {
        (0..self.n_w)
            .map(|k| (self.u_min + k as f64 * self.du).exp())
            .collect()
    }

    /// Index of the best candidate at post-withdrawal wealth `w > 0`; ties go
    /// to the smaller fraction.
    pub fn best_index(&self, objective: &[f64], w: f64) -> usize {
        let lw = w.ln();
        let (lp0, lq0) = self.log_fractions[0];
        let mut best = self.grid.interpolate(objective, lw + lp0, lw + lq0);
        let mut arg = 0;
        for (m, &(lp, lq)) in self.log_fractions.iter().enumerate().skip(1) {
            let v = self.grid.interpolate(objective, lw + lp, lw + lq);
            if v > best + TIE_TOLERANCE * best.abs().max(1.0) {
                best = v;
                arg = m;
            }
        }
        arg
    }

    pub fn fraction(&self, m: usize) -> f64 {
        self.fractions[m]
    }

    /// Values of every grid at `w` invested with candidate `m`.
    pub fn values_at(&self, v_plus: &[ValueGrid], w: f64, m: usize, out: &mut Vec<f64>) {
        let lw = w.ln();
        let (lp, lq) = self.log_fractions[m];
        out.clear();
        out.extend(
            v_plus
                .iter()
                .map(|v| self.grid.interpolate(&v.main, lw + lp, lw + lq)),
        );
    }

    /// Optimal fraction and the resulting values at one post-withdrawal
    /// wealth. Non-positive wealth is liquidated to the debt grid.
    pub fn evaluate(&self, v_plus: &[ValueGrid], w: f64) -> (f64, Vec<f64>) {
        if !(w > 0.0) {
            return (
                0.0,
                v_plus
                    .iter()
                    .map(|v| self.grid.debt_value(&v.debt, w))
                    .collect(),
            );
        }
        let m = self.best_index(&v_plus[0].main, w);
        let mut out = Vec::with_capacity(v_plus.len());
        self.values_at(v_plus, w, m, &mut out);
        (self.fraction(m), out)
    }
}

/// Applies the withdrawal at date `n` and the optimal rebalance, mapping
/// grids at `t_n^+` to `t_n^-`. The first grid must be the one being
/// maximized; the rest are carried along with the same controls.
pub fn apply_rebalance(
    grid: &StateGrid,
    v_plus: &[ValueGrid],
    components: &[Component],
    rule: &WithdrawalRule,
    n: usize,
    t: f64,
    n_p: usize,
) -> (Vec<ValueGrid>, ControlSlice) {
    assert_eq!(v_plus.len(), components.len());
    let search = ControlSearch::new(grid, n_p);
    let nodes = search.wealth_nodes();
    let k = v_plus.len();
    // best[c][node]
    let mut best = vec![Vec::with_capacity(nodes.len()); k];
    let mut p = Vec::with_capacity(nodes.len());
    let mut buf = Vec::with_capacity(k);
    for &w in &nodes {
        let m = search.best_index(&v_plus[0].main, w);
        search.values_at(v_plus, w, m, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            best[c].push(v);
        }
        p.push(search.fraction(m));
    }

    let mut out: Vec<ValueGrid> = (0..k)
        .map(|_| ValueGrid {
            main: Vec::with_capacity(grid.len()),
            debt: Vec::with_capacity(grid.n_y),
            n,
            side: TimeSide::Before,
        })
        .collect();
    let b_levels: Vec<f64> = (0..grid.n_y).map(|j| grid.y(j).exp()).collect();
    for i in 0..grid.n_x {
        let s = grid.x(i).exp();
        for &b in &b_levels {
            let w_minus = s + b;
            let q = rule.withdrawal(n, w_minus);
            let w_plus = w_minus - q;
            if w_plus > 0.0 {
                let (l, f) = locate(w_plus.ln(), search.u_min, search.du, search.n_w);
                for (c, o) in out.iter_mut().enumerate() {
                    let add = if components[c].adds_withdrawal() {
                        q
                    } else {
                        0.0
                    };
                    o.main
                        .push(best[c][l] + f * (best[c][l + 1] - best[c][l]) + add);
                }
            } else {
                for (c, o) in out.iter_mut().enumerate() {
                    let add = if components[c].adds_withdrawal() {
                        q
                    } else {
                        0.0
                    };
                    o.main.push(grid.debt_value(&v_plus[c].debt, w_plus) + add);
                }
            }
        }
    }
    for &b in &b_levels {
        let w_minus = -b;
        let q = rule.withdrawal(n, w_minus);
        let w_plus = w_minus - q;
        for (c, o) in out.iter_mut().enumerate() {
            let add = if components[c].adds_withdrawal() {
                q
            } else {
                0.0
            };
            o.debt.push(grid.debt_value(&v_plus[c].debt, w_plus) + add);
        }
    }
    (out, ControlSlice { n, t, w: nodes, p })
}
