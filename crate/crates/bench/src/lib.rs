//! Shared fixtures for the benchmarks.

use decum_core::dp::{GridSpec, StateGrid};
use decum_core::{MortalityTable, Scenario};

/// The base case: ARVA withdrawals, 30 years, annual rebalancing.
pub fn base() -> Scenario {
    Scenario::base(&MortalityTable::standin_male()).expect("base scenario")
}

pub fn grid(n: usize) -> StateGrid {
    StateGrid::new(&GridSpec::square(n)).expect("grid")
}
