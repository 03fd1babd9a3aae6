//! Monte Carlo and bootstrap evaluation of strategies.

pub mod source;
pub mod stats;
pub mod strategy;

pub use source::{BootstrapSource, PathSource, SyntheticSource};
pub use stats::{
    ew_es_summary, expected_shortfall, median, percentile_fan, FanField, FanPoint, SummaryStats,
};
pub use strategy::{simulate_strategy, PathOutcomes, Strategy};
