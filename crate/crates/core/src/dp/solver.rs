//! Backward induction for a fixed `W*` and the outer search over `W*`.

use serde::{Deserialize, Serialize};

use crate::dp::control::{scenario_hash, ControlTable};
use crate::dp::grid::{GridSpec, StateGrid, TimeSide, ValueGrid};
use crate::dp::propagate::{FourierPropagator, Propagator};
use crate::dp::rebalance::{apply_rebalance, Component, ControlSearch, ControlSlice};
use crate::error::{invalid, Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub kappa: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_epsilon() -> f64 {
    -1e-4
}

impl ObjectiveParams {
    pub fn new(kappa: f64) -> Self {
        ObjectiveParams {
            kappa,
            alpha: default_alpha(),
            epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(invalid(format!("kappa = {} must be > 0", self.kappa)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha = {} must lie in (0, 1)",
                self.alpha
            )));
        }
        if !self.epsilon.is_finite() {
            return Err(invalid("epsilon must be finite"));
        }
        Ok(())
    }
}

/// Terminal value of a component at terminal wealth `w`.
pub fn terminal_payoff(c: Component, w: f64, w_star: f64, obj: &ObjectiveParams) -> f64 {
    let shortfall = w_star + (w - w_star).min(0.0) / obj.alpha;
    match c {
        Component::Objective => obj.kappa * shortfall + obj.epsilon * w,
        Component::Withdrawals => 0.0,
        Component::Shortfall => shortfall,
        Component::Wealth => w,
    }
}

/// Objective at `T^+` on every node, labelled with date index `m`.
pub fn terminal_value(grid: &StateGrid, m: usize, w_star: f64, obj: &ObjectiveParams) -> ValueGrid {
    ValueGrid::from_wealth_fn(grid, m, TimeSide::After, |w| {
        terminal_payoff(Component::Objective, w, w_star, obj)
    })
}

/// Bracket and resolution of the outer search over `W*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub lo: f64,
    pub hi: f64,
    pub scan_points: usize,
    /// Width of the final golden-section bracket.
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lo: -500.0,
            hi: 1500.0,
            scan_points: 129,
            tolerance: 0.01,
        }
    }
}

/// Solution of the auxiliary problem at one `W*`.
#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub w_star: f64,
    /// Objective at `(s, b) = (0, W_0)` just before the first withdrawal.
    pub value: f64,
    /// Expected total withdrawals.
    pub ew: f64,
    /// Expected shortfall implied by the controls at this `W*`.
    pub es: f64,
    pub expected_terminal_wealth: f64,
    /// Equity fraction chosen at `t_0` for wealth `W_0 - q_0`.
    pub p0: f64,
    pub controls: Vec<ControlSlice>,
    /// Grids at `t_0^+` in the order objective, withdrawals, shortfall, wealth.
    pub initial: Vec<ValueGrid>,
}

/// Result of the outer maximization over `W*`.
#[derive(Debug, Clone)]
pub struct Precommitment {
    pub w_star: f64,
    pub value: f64,
    pub ew: f64,
    pub es: f64,
    pub expected_terminal_wealth: f64,
    pub table: ControlTable,
    /// Every `(W*, value)` pair evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

const DECOMPOSED: [Component; 4] = [
    Component::Objective,
    Component::Withdrawals,
    Component::Shortfall,
    Component::Wealth,
];

pub struct Solver<'a> {
    scenario: &'a Scenario,
    spec: GridSpec,
    grid: StateGrid,
    n_p: usize,
    obj: ObjectiveParams,
    propagator: Box<dyn Propagator + 'a>,
}

struct Run {
    values: Vec<f64>,
    p0: f64,
    controls: Vec<ControlSlice>,
    initial: Vec<ValueGrid>,
}

impl<'a> Solver<'a> {
    /// Solver using Fourier propagation on the grid described by `spec`.
    pub fn new(scenario: &'a Scenario, spec: &GridSpec, obj: ObjectiveParams) -> Result<Self> {
        scenario.validate()?;
        let grid = StateGrid::new(spec)?;
        let prop = FourierPropagator::new(&grid, &scenario.market, scenario.dt(), spec.extension)?;
        Self::with_propagator(scenario, spec, obj, Box::new(prop))
    }

    pub fn with_propagator(
        scenario: &'a Scenario,
        spec: &GridSpec,
        obj: ObjectiveParams,
        propagator: Box<dyn Propagator + 'a>,
    ) -> Result<Self> {
        scenario.validate()?;
        obj.validate()?;
        let grid = propagator.grid().clone();
        if grid != StateGrid::new(spec)? {
            return Err(Error::GridMismatch(
                "propagator grid differs from the grid spec".into(),
            ));
        }
        Ok(Solver {
            scenario,
            spec: *spec,
            grid,
            n_p: spec.controls(),
            obj,
            propagator,
        })
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn objective(&self) -> &ObjectiveParams {
        &self.obj
    }

    /// Grids at `t_M^-`: the last withdrawal followed by the terminal payoff.
    fn last_date(&self, w_star: f64, components: &[Component]) -> Vec<ValueGrid> {
        let m = self.scenario.m;
        let rule = &self.scenario.rule;
        components
            .iter()
            .map(|&c| {
                ValueGrid::from_wealth_fn(&self.grid, m, TimeSide::Before, |w_minus| {
                    let q = rule.withdrawal(m, w_minus);
                    let add = if c.adds_withdrawal() { q } else { 0.0 };
                    terminal_payoff(c, w_minus - q, w_star, &self.obj) + add
                })
            })
            .collect()
    }

    fn backward(&self, w_stars: &[f64], components: &[Component], keep: bool) -> Result<Vec<Run>> {
        let k = components.len();
        let mut grids: Vec<ValueGrid> = w_stars
            .iter()
            .flat_map(|&w| self.last_date(w, components))
            .collect();
        let mut controls: Vec<Vec<ControlSlice>> = vec![Vec::new(); w_stars.len()];
        let dt = self.scenario.dt();
        for n in (0..self.scenario.m).rev() {
            self.propagator.propagate(&mut grids)?;
            if n == 0 && !keep {
                break;
            }
            if n == 0 {
                // keep the t_0^+ grids for evaluation at the initial state
                let mut next = Vec::with_capacity(grids.len());
                for (r, chunk) in grids.chunks(k).enumerate() {
                    let (_, slice) = apply_rebalance(
                        &self.grid,
                        chunk,
                        components,
                        &self.scenario.rule,
                        n,
                        0.0,
                        self.n_p,
                    );
                    controls[r].push(slice);
                    next.extend(chunk.iter().cloned());
                }
                grids = next;
                break;
            }
            let mut next = Vec::with_capacity(grids.len());
            for (r, chunk) in grids.chunks(k).enumerate() {
                let (v, slice) = apply_rebalance(
                    &self.grid,
                    chunk,
                    components,
                    &self.scenario.rule,
                    n,
                    n as f64 * dt,
                    self.n_p,
                );
                if keep {
                    controls[r].push(slice);
                }
                next.extend(v);
            }
            grids = next;
        }

        let search = ControlSearch::new(&self.grid, self.n_p);
        let w0 = self.scenario.w0;
        let q0 = self.scenario.rule.withdrawal(0, w0);
        let w0_plus = w0 - q0;
        let mut runs = Vec::with_capacity(w_stars.len());
        for (r, chunk) in grids.chunks(k).enumerate() {
            let (p0, mut values) = search.evaluate(chunk, w0_plus);
            for (v, c) in values.iter_mut().zip(components) {
                if c.adds_withdrawal() {
                    *v += q0;
                }
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "non-finite value at W* = {}",
                    w_stars[r]
                )));
            }
            let mut slices = std::mem::take(&mut controls[r]);
            slices.reverse();
            if let Some(first) = slices.first_mut() {
                if w0_plus > 0.0 {
                    first.insert(w0_plus, p0);
                }
            }
            runs.push(Run {
                values,
                p0,
                controls: slices,
                initial: if keep { chunk.to_vec() } else { Vec::new() },
            });
        }
        Ok(runs)
    }

    /// Objective at the initial state for each `W*`, sharing transforms
    /// between pairs of candidates.
    pub fn values(&self, w_stars: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .backward(w_stars, &[Component::Objective], false)?
            .into_iter()
            .map(|r| r.values[0])
            .collect())
    }

    /// Full solution at one `W*`, with the withdrawal, shortfall and wealth
    /// expectations carried alongside the objective.
    pub fn solve_auxiliary(&self, w_star: f64) -> Result<AuxiliarySolution> {
        let run = self.backward(&[w_star], &DECOMPOSED, true)?.pop().unwrap();
        Ok(AuxiliarySolution {
            w_star,
            value: run.values[0],
            ew: run.values[1],
            es: run.values[2],
            expected_terminal_wealth: run.values[3],
            p0: run.p0,
            controls: run.controls,
            initial: run.initial,
        })
    }

    /// Objective at `(0, w0)` just before the first withdrawal, reusing the
    /// `t_0^+` grids of a solved problem.
    pub fn value_at_initial_wealth(&self, sol: &AuxiliarySolution, w0: f64) -> f64 {
        let q0 = self.scenario.rule.withdrawal(0, w0);
        let search = ControlSearch::new(&self.grid, self.n_p);
        let (_, v) = search.evaluate(&sol.initial[..1], w0 - q0);
        v[0] + q0
    }

    /// Maximizes the initial objective over `W*`: a coarse scan over the
    /// bracket, then golden-section refinement around the best scan point.
    pub fn solve_precommitment(&self, search: &SearchConfig) -> Result<Precommitment> {
        if !(search.hi > search.lo) || search.scan_points < 3 || !(search.tolerance > 0.0) {
            return Err(invalid("invalid W* search configuration"));
        }
        let n = search.scan_points;
        let h = (search.hi - search.lo) / (n - 1) as f64;
        let points: Vec<f64> = (0..n).map(|k| search.lo + k as f64 * h).collect();
        let mut evaluations = Vec::new();
        for chunk in points.chunks(2) {
            let v = self.values(chunk)?;
            evaluations.extend(chunk.iter().copied().zip(v));
        }
        // ties go to the largest W*
        let mut best = 0;
        for k in 1..n {
            if evaluations[k].1 >= evaluations[best].1 {
                best = k;
            }
        }
        if best == 0 || best == n - 1 {
            return Err(Error::BracketBoundary {
                w_star: points[best],
                lo: search.lo,
                hi: search.hi,
            });
        }

        let mut top = evaluations[best];
        let consider = |w: f64, v: f64, top: &mut (f64, f64)| {
            if v > top.1 || (v == top.1 && w > top.0) {
                *top = (w, v);
            }
        };
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (points[best - 1], points[best + 1]);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let fc_fd = self.values(&[c, d])?;
        let (mut fc, mut fd) = (fc_fd[0], fc_fd[1]);
        evaluations.push((c, fc));
        evaluations.push((d, fd));
        consider(c, fc, &mut top);
        consider(d, fd, &mut top);
        while b - a > search.tolerance {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.values(&[c])?[0];
                evaluations.push((c, fc));
                consider(c, fc, &mut top);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.values(&[d])?[0];
                evaluations.push((d, fd));
                consider(d, fd, &mut top);
            }
        }

        let sol = self.solve_auxiliary(top.0)?;
        let table = ControlTable::new(
            &self.spec,
            scenario_hash(self.scenario)?,
            self.obj,
            sol.w_star,
            sol.controls.clone(),
        );
        Ok(Precommitment {
            w_star: sol.w_star,
            value: sol.value,
            ew: sol.ew,
            es: sol.es,
            expected_terminal_wealth: sol.expected_terminal_wealth,
            table,
            evaluations,
        })
    }
}
