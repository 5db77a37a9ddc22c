//! Age-of-information control for asynchronous grant-free random access.
//!
//! The pipeline has four stages:
//!
//! 1. [`phy`] simulates one frame of asynchronous replica reception with
//!    Rician fading and per-pool capture-SIC.
//! 2. [`calibration`] condenses the simulator into a success table
//!    `p̂(a; Λ)` indexed by action and per-pool load.
//! 3. [`mdp`] solves the fixed-load average-cost MDP over the AoI state and
//!    [`mean_field`] closes the loop between policy and induced load.
//! 4. [`baselines`] and [`experiments`] compare the equilibrium policies with
//!    age-independent access on the AoI/energy tradeoff.

pub mod action;
pub mod baselines;
pub mod calibration;
pub mod config;
pub mod experiments;
pub mod mdp;
pub mod mean_field;
pub mod phy;
pub mod rng;

pub use action::{action_set, Action};
pub use calibration::{calibrate_table, SuccessTable, TableError};
pub use config::{ConfigError, SystemConfig};
pub use mdp::{relative_value_iteration, MdpModel, MdpSolution, RviOptions};
pub use mean_field::{solve_equilibrium, Equilibrium, FixedPointConfig, InitialDistribution, PopulationConfig};

/// Version string recorded in every exported file.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
