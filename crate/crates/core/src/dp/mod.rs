//! Backward induction for the expanded-state auxiliary problem.

pub mod control;
pub mod grid;
pub mod propagate;
pub mod rebalance;
pub mod solver;

pub use control::{scenario_hash, ControlTable};
pub use grid::{GridSpec, StateGrid, TimeSide, ValueGrid};
pub use propagate::{FourierPropagator, LatticeOutcome, LatticePropagator, Propagator};
pub use rebalance::{apply_rebalance, Component, ControlSearch, ControlSlice};
pub use solver::{
    terminal_payoff, terminal_value, AuxiliarySolution, ObjectiveParams, Precommitment,
    SearchConfig, Solver,
};
