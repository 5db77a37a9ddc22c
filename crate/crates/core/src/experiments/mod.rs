//! Orchestration on top of the solvers: multiplier sweeps, closed-loop
//! packet-level validation, the oracle verification suite, and exporters.

mod closed_loop;
pub mod export;
mod sweep;
mod verify;

pub use closed_loop::{closed_loop_simulate, default_warmup, ClosedLoopResult, MeanFieldGap, GAP_THRESHOLD};
pub use sweep::{log_grid, sweep_eta, switch_points, SweepRecord};
pub use verify::{
    check_dominance, check_fading, check_lp_vs_rvi, check_stationary, check_structure, random_model, verify_suite,
    CheckOutcome, VerifyReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid multiplier grid: {0}")]
    Grid(String),
    #[error("invalid simulation settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Phy(#[from] crate::phy::PhyError),
}
