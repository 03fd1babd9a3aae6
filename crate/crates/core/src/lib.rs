//! Optimal decumulation under a bounded ARVA spending rule.

// Validation is written as `!(x > 0.0)` on purpose so that NaN fails it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arva;
pub mod calibration;
pub mod config;
pub mod dp;
pub mod error;
pub mod history;
pub mod market;
pub mod mortality;
pub mod report;
pub mod scenario;
pub mod sim;

pub use arva::{
    annuity_factor_a, arva_withdrawal, lump_sum_fraction, write_schedule_csv, ArvaConfig,
    WithdrawalRule,
};
pub use calibration::{
    calibrate_pair, detect_jumps, estimate_correlation, fit_gbm, fit_jump_diffusion, JumpDetection,
    JumpDiffusionFit, PairCalibration,
};
pub use config::ScenarioConfig;
pub use dp::{ControlTable, GridSpec, ObjectiveParams, SearchConfig, Solver};
pub use error::{Error, ErrorKind, Result};
pub use history::{ingest_market_csv, MonthId, PairedHistory, ReturnSeries};
pub use market::{
    joint_log_characteristic, jump_compensator, path_rng, sample_period_returns, JumpParams,
    MarketParams, PeriodReturns,
};
pub use mortality::{conditional_horizon, MortalityTable};
pub use report::{frontier_sweep, run_scenario, FrontierPoint, Sweep};
pub use scenario::Scenario;
pub use sim::{
    ew_es_summary, expected_shortfall, percentile_fan, simulate_strategy, PathOutcomes, Strategy,
    SummaryStats,
};
