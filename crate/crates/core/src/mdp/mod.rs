//! Fixed-load representative-device MDP over the truncated AoI state
//! `{1, ..., Δ_max}`.
//!
//! Under action `a` the AoI resets to 1 with probability `p̂(a; Λ)` and
//! otherwise moves to `min(Δ + 1, Δ_max)`; the stage cost is `Δ + η E(a)`.

mod model;
mod occupation;
mod rvi;
pub mod simplex;
mod structure;

pub use model::{build_model, MdpModel};
pub use occupation::{occupation_lp_solve, OccupationSolution, MAX_LP_SIZE};
pub use rvi::{relative_value_iteration, MdpSolution, RviOptions};
pub use structure::{extract_structure, filter_dominated, pairwise_threshold, StructureReport, SwitchPoint};

use thiserror::Error;

use crate::calibration::TableError;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("relative value iteration did not converge in {iterations} iterations (span residual {residual:e})")]
    NotConverged { iterations: u64, residual: f64 },
    #[error("actions are not ordered by energy and success: {0}")]
    NotOrdered(String),
    #[error("occupation LP has {size} variables, above the dense limit {limit}")]
    LpTooLarge { size: usize, limit: usize },
    #[error(transparent)]
    Lp(#[from] simplex::LpError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Index of the minimum value, treating values within a relative `1e-12`
/// of the minimum as ties and resolving them by (energy, d, q).
pub(crate) fn argmin_tie_break(values: &[f64], actions: &[crate::Action], scale: f64) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + scale.abs().max(best.abs()));
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= best + tol)
        .min_by_key(|(i, _)| actions[*i].tie_key())
        .map(|(i, _)| i)
        .expect("at least one action")
}
