//! Mean-field closure: the load a population induces, the stationary AoI
//! law of a policy, and the damped fixed point tying the two to the best
//! response.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::calibration::{SuccessTable, TableError};
use crate::config::SystemConfig;
use crate::mdp::{build_model, relative_value_iteration, MdpError, RviOptions};

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("invalid population: {0}")]
    Population(String),
    #[error("invalid fixed-point settings: {0}")]
    FixedPoint(String),
    #[error("policy covers {policy} states but the AoI space has {states}")]
    PolicyLength { policy: usize, states: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_devices: u32,
    pub pools: u32,
    pub frame_len: f64,
}

impl PopulationConfig {
    pub fn new(n_devices: u32, pools: u32, frame_len: f64) -> Result<Self, MeanFieldError> {
        if n_devices < 2 {
            return Err(MeanFieldError::Population(format!(
                "need at least 2 devices, got {n_devices}"
            )));
        }
        if pools < 1 {
            return Err(MeanFieldError::Population("need at least one pool".into()));
        }
        if !(frame_len > 0.0 && frame_len.is_finite()) {
            return Err(MeanFieldError::Population(format!(
                "frame length {frame_len} must be > 0"
            )));
        }
        Ok(Self {
            n_devices,
            pools,
            frame_len,
        })
    }

    pub fn from_system(cfg: &SystemConfig) -> Result<Self, MeanFieldError> {
        Self::new(cfg.n_devices, cfg.pools, cfg.frame_len)
    }

    /// Per-pool load `(N-1) e / (T_f R)` when every device spends `e`
    /// replicas per frame on average.
    pub fn load_for_energy(&self, energy: f64) -> f64 {
        f64::from(self.n_devices - 1) * energy / (self.frame_len * f64::from(self.pools))
    }

    /// Inverse of [`load_for_energy`](Self::load_for_energy).
    pub fn energy_for_load(&self, load: f64) -> f64 {
        load * self.frame_len * f64::from(self.pools) / f64::from(self.n_devices - 1)
    }
}

/// Stationary policy over AoI states `1..=Δ_max`.
#[derive(Debug, Clone, PartialEq)]
pub enum StationaryPolicy {
    Deterministic(Vec<Action>),
    /// `probs[state][i]` is the probability of `actions[i]`.
    Randomized {
        actions: Vec<Action>,
        probs: Vec<Vec<f64>>,
    },
}

impl StationaryPolicy {
    pub fn n_states(&self) -> usize {
        match self {
            Self::Deterministic(p) => p.len(),
            Self::Randomized { probs, .. } => probs.len(),
        }
    }

    /// Expected replicas `E[d q]` sent in `state` (0-based).
    pub fn expected_energy(&self, state: usize) -> f64 {
        match self {
            Self::Deterministic(p) => f64::from(p[state].energy()),
            Self::Randomized { actions, probs } => probs[state]
                .iter()
                .zip(actions)
                .map(|(w, a)| w * f64::from(a.energy()))
                .sum(),
        }
    }
}

/// `Λ(m, π) = (N-1)/T_f Σ_Δ m(Δ) E[d q | Δ] / R`.
pub fn induced_load(m: &[f64], policy: &StationaryPolicy, pop: &PopulationConfig) -> f64 {
    let energy: f64 = m.iter().enumerate().map(|(s, w)| w * policy.expected_energy(s)).sum();
    pop.load_for_energy(energy)
}

/// Load functional of an occupation measure `x[state][action]`.
pub fn occupation_load(x: &[Vec<f64>], actions: &[Action], pop: &PopulationConfig) -> f64 {
    let energy: f64 = x
        .iter()
        .flat_map(|row| row.iter().zip(actions))
        .map(|(w, a)| w * f64::from(a.energy()))
        .sum();
    pop.load_for_energy(energy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub m: Vec<f64>,
    /// All mass is trapped at `Δ_max` because no action there can deliver.
    pub degenerate: bool,
}

/// Stationary law of the reset chain with per-state success `p`.
///
/// `m(Δ+1) ∝ Π_{k≤Δ} (1 - p(k))` below the truncation, and `Δ_max` carries
/// the remaining tail `Π_{k<Δ_max} (1 - p(k)) / p(Δ_max)`.
pub fn stationary_from_success(p: &[f64]) -> StationaryDistribution {
    let n = p.len();
    let mut m = vec![0.0; n];
    let mut survive = 1.0;
    for s in 0..n - 1 {
        m[s] = survive;
        survive *= 1.0 - p[s];
    }
    if survive > 0.0 && p[n - 1] == 0.0 {
        let mut point = vec![0.0; n];
        point[n - 1] = 1.0;
        return StationaryDistribution {
            m: point,
            degenerate: true,
        };
    }
    m[n - 1] = if survive > 0.0 { survive / p[n - 1] } else { 0.0 };
    let total: f64 = m.iter().sum();
    m.iter_mut().for_each(|x| *x /= total);
    StationaryDistribution { m, degenerate: false }
}

/// Stationary AoI distribution of a deterministic policy at load `lambda`.
pub fn stationary_distribution(
    policy: &[Action],
    lambda: f64,
    table: &SuccessTable,
    delta_max: u32,
) -> Result<StationaryDistribution, MeanFieldError> {
    if policy.len() != delta_max as usize {
        return Err(MeanFieldError::PolicyLength {
            policy: policy.len(),
            states: delta_max as usize,
        });
    }
    let p = policy
        .iter()
        .map(|&a| table.success_prob(a, lambda))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(stationary_from_success(&p))
}

/// Average AoI `Σ m(Δ) Δ` and energy `Σ m(Δ) E(π(Δ))`.
pub fn stationary_metrics(m: &[f64], policy: &[Action]) -> (f64, f64) {
    m.iter()
        .zip(policy)
        .enumerate()
        .fold((0.0, 0.0), |(aoi, energy), (s, (w, a))| {
            (aoi + w * (s as f64 + 1.0), energy + w * f64::from(a.energy()))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    /// Load damping `β`.
    pub damp_load: f64,
    /// Distribution damping.
    pub damp_dist: f64,
    pub tol_load: f64,
    /// L1 tolerance on the distribution residual.
    pub tol_dist: f64,
    pub max_outer_iters: u32,
    pub lambda_init: f64,
    pub m_init: InitialDistribution,
}

/// Starting AoI distribution of the fixed-point iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDistribution {
    /// Stationary law of the best response at `lambda_init`. A uniform start
    /// over a long AoI range puts most mass at ages where the best response
    /// transmits heavily, which overshoots the load on the first step.
    #[default]
    BestResponse,
    Uniform,
    /// Explicit weights over `1..=Δ_max`, normalized before use.
    Given(Vec<f64>),
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            damp_load: 0.3,
            damp_dist: 0.5,
            tol_load: 1e-3,
            tol_dist: 1e-4,
            max_outer_iters: 500,
            lambda_init: 0.0,
            m_init: InitialDistribution::BestResponse,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<(), MeanFieldError> {
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if !in_unit(self.damp_load) || !in_unit(self.damp_dist) {
            return Err(MeanFieldError::FixedPoint("damping factors must lie in (0, 1]".into()));
        }
        if !(self.tol_load > 0.0 && self.tol_dist > 0.0) {
            return Err(MeanFieldError::FixedPoint("tolerances must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(MeanFieldError::FixedPoint("need at least one outer iteration".into()));
        }
        if !(self.lambda_init >= 0.0 && self.lambda_init.is_finite()) {
            return Err(MeanFieldError::FixedPoint("initial load must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub eta: f64,
    pub policy: Vec<Action>,
    /// Relative values of the best response at `lambda_star`.
    pub v: Vec<f64>,
    pub m: Vec<f64>,
    pub lambda_star: f64,
    pub rho: f64,
    pub avg_aoi: f64,
    pub avg_energy: f64,
    pub converged: bool,
    pub outer_iters: u32,
    /// `|Λ* - Λ(m*, π*)|`.
    pub load_residual: f64,
    /// `‖m* - μ(π*, Λ*)‖₁`.
    pub dist_residual: f64,
    /// The stationary law at `Λ*` is a point mass at `Δ_max`.
    pub degenerate: bool,
}

impl Equilibrium {
    pub fn metrics(&self) -> (f64, f64) {
        stationary_metrics(&self.m, &self.policy)
    }
}

struct Iterate {
    policy: Vec<Action>,
    v: Vec<f64>,
    m: Vec<f64>,
    lambda: f64,
    rho: f64,
    load_residual: f64,
    dist_residual: f64,
    degenerate: bool,
    iter: u32,
}

/// Damped nested fixed-point iteration for one energy multiplier.
///
/// Each outer step computes the best response at the current load, then
/// moves the load toward `Λ(m, π)` and the distribution toward `μ(π, Λ)`.
/// If the tolerances are not met within `max_outer_iters`, the iterate with
/// the smallest tolerance-scaled residual is returned with
/// `converged = false`.
pub fn solve_equilibrium(
    eta: f64,
    table: &SuccessTable,
    pop: &PopulationConfig,
    fp: &FixedPointConfig,
    delta_max: u32,
) -> Result<Equilibrium, MeanFieldError> {
    fp.validate()?;
    let n = delta_max as usize;
    let rvi = RviOptions::default();
    let mut m = match &fp.m_init {
        InitialDistribution::BestResponse => {
            let model = build_model(table, fp.lambda_init, eta, delta_max)?;
            let sol = relative_value_iteration(&model, &rvi, None)?;
            stationary_distribution(&sol.policy, fp.lambda_init, table, delta_max)?.m
        }
        InitialDistribution::Uniform => vec![1.0 / n as f64; n],
        InitialDistribution::Given(init) if init.len() == n => {
            let total: f64 = init.iter().sum();
            if !(total > 0.0) || init.iter().any(|x| !(*x >= 0.0)) {
                return Err(MeanFieldError::FixedPoint(
                    "initial distribution must be nonnegative and nonzero".into(),
                ));
            }
            init.iter().map(|x| x / total).collect()
        }
        InitialDistribution::Given(init) => {
            return Err(MeanFieldError::PolicyLength {
                policy: init.len(),
                states: n,
            })
        }
    };
    let mut lambda = fp.lambda_init;
    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<(f64, Iterate)> = None;

    for iter in 1..=fp.max_outer_iters {
        let model = build_model(table, lambda, eta, delta_max)?;
        let sol = relative_value_iteration(&model, &rvi, warm.as_deref())?;
        let policy = StationaryPolicy::Deterministic(sol.policy.clone());
        let mu = stationary_distribution(&sol.policy, lambda, table, delta_max)?;

        let target = induced_load(&m, &policy, pop);
        let load_residual = (lambda - target).abs();
        let dist_residual: f64 = m.iter().zip(&mu.m).map(|(a, b)| (a - b).abs()).sum();
        let score = (load_residual / fp.tol_load).max(dist_residual / fp.tol_dist);
        let converged = load_residual <= fp.tol_load && dist_residual <= fp.tol_dist;

        if converged || best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((
                score,
                Iterate {
                    policy: sol.policy.clone(),
                    v: sol.v.clone(),
                    m: m.clone(),
                    lambda,
                    rho: sol.rho,
                    load_residual,
                    dist_residual,
                    degenerate: mu.degenerate,
                    iter,
                },
            ));
        }
        if converged {
            break;
        }

        lambda = (1.0 - fp.damp_load) * lambda + fp.damp_load * target;
        let mu = stationary_distribution(&sol.policy, lambda, table, delta_max)?;
        for (x, y) in m.iter_mut().zip(&mu.m) {
            *x = (1.0 - fp.damp_dist) * *x + fp.damp_dist * y;
        }
        warm = Some(sol.v);
    }

    let (_, it) = best.expect("at least one outer iteration");
    let converged = it.load_residual <= fp.tol_load && it.dist_residual <= fp.tol_dist;
    let (avg_aoi, avg_energy) = stationary_metrics(&it.m, &it.policy);
    Ok(Equilibrium {
        eta,
        policy: it.policy,
        v: it.v,
        m: it.m,
        lambda_star: it.lambda,
        rho: it.rho,
        avg_aoi,
        avg_energy,
        converged,
        outer_iters: if converged { it.iter } else { fp.max_outer_iters },
        load_residual: it.load_residual,
        dist_residual: it.dist_residual,
        degenerate: it.degenerate,
    })
}
