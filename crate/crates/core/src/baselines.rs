//! Age-independent comparison policies: the best randomized mix at a given
//! energy and the degree-{1,2} repetition mixes matched to a budget.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::action::Action;
use crate::calibration::{SuccessTable, TableError};
use crate::mean_field::PopulationConfig;
use crate::rng::stream_rng;

const ENERGY_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("energy level {energy} outside [0, {max}]")]
    InfeasibleEnergy { energy: f64, max: f64 },
    #[error("degree parameter {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("invalid action mix: {0}")]
    InvalidMix(String),
    #[error("need at least {min} frames, got {got}")]
    TooFewFrames { min: u64, got: u64 },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Best state-independent mix spending `energy` replicas per frame on
/// average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomizedBaseline {
    pub energy: f64,
    /// Load induced when the whole population plays the mix.
    pub lambda: f64,
    /// Support of the mix with its probabilities.
    pub mix: Vec<(Action, f64)>,
    pub p_star: f64,
    /// `1 / p_star`, infinite when nothing is ever delivered.
    pub avg_aoi: f64,
}

impl RandomizedBaseline {
    pub fn reaches_success(&self) -> bool {
        self.p_star > 0.0
    }
}

/// Maximizes `Σ r_i p̂(a_i; Λ(c))` subject to `Σ r_i E(a_i) = c` over
/// probability vectors `r`.
///
/// With two equality constraints every vertex has at most two nonzero
/// entries, so enumerating single actions at energy `c` and pairs bracketing
/// `c` is exact.
pub fn randomized_lp(
    table: &SuccessTable,
    energy: f64,
    pop: &PopulationConfig,
) -> Result<RandomizedBaseline, BaselineError> {
    let max = table.actions.iter().map(|a| a.energy()).max().unwrap_or(0);
    if !(0.0..=f64::from(max)).contains(&energy) {
        return Err(BaselineError::InfeasibleEnergy {
            energy,
            max: f64::from(max),
        });
    }
    let lambda = pop.load_for_energy(energy);
    let p = table.success_probs(lambda);
    let e: Vec<f64> = table.actions.iter().map(|a| f64::from(a.energy())).collect();

    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut consider = |value: f64, support: Vec<(usize, f64)>| {
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, support));
        }
    };
    for i in 0..e.len() {
        if (e[i] - energy).abs() <= ENERGY_EPS {
            consider(p[i], vec![(i, 1.0)]);
        }
    }
    for i in 0..e.len() {
        for j in 0..e.len() {
            if e[i] < energy && energy < e[j] {
                let rj = (energy - e[i]) / (e[j] - e[i]);
                consider((1.0 - rj) * p[i] + rj * p[j], vec![(i, 1.0 - rj), (j, rj)]);
            }
        }
    }
    let (p_star, support) = best.ok_or(BaselineError::InfeasibleEnergy {
        energy,
        max: f64::from(max),
    })?;
    Ok(RandomizedBaseline {
        energy,
        lambda,
        mix: support.into_iter().map(|(i, r)| (table.actions[i], r)).collect(),
        p_star,
        avg_aoi: if p_star > 0.0 { 1.0 / p_star } else { f64::INFINITY },
    })
}

/// Repetition baseline with degree distribution `α x + (1-α) x²` and a
/// single pool, thinned to spend an average budget `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrsaBaseline {
    pub alpha: f64,
    pub budget: f64,
    pub feasible: bool,
    /// Present only when the budget is feasible.
    pub mix: Option<IrsaMix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrsaMix {
    /// Probability of being active in a frame.
    pub theta: f64,
    /// Idle, `(1,1)` and `(2,1)` with their probabilities.
    pub probs: [(Action, f64); 3],
    pub lambda: f64,
    pub p_success: f64,
    pub avg_aoi: f64,
}

impl IrsaMix {
    pub fn average_energy(&self) -> f64 {
        self.probs.iter().map(|(a, r)| r * f64::from(a.energy())).sum()
    }
}

/// Average degree `2 - α` of the repetition code.
pub fn irsa_mean_degree(alpha: f64) -> f64 {
    2.0 - alpha
}

pub fn irsa_baseline(
    alpha: f64,
    budget: f64,
    table: &SuccessTable,
    pop: &PopulationConfig,
) -> Result<IrsaBaseline, BaselineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BaselineError::InvalidAlpha(alpha));
    }
    let feasible = (0.0..=irsa_mean_degree(alpha)).contains(&budget);
    if !feasible {
        return Ok(IrsaBaseline {
            alpha,
            budget,
            feasible,
            mix: None,
        });
    }
    let theta = budget / irsa_mean_degree(alpha);
    let single = Action::new(1, 1);
    let double = Action::new(2, 1);
    let lambda = pop.load_for_energy(budget);
    let p_success =
        theta * (alpha * table.success_prob(single, lambda)? + (1.0 - alpha) * table.success_prob(double, lambda)?);
    Ok(IrsaBaseline {
        alpha,
        budget,
        feasible,
        mix: Some(IrsaMix {
            theta,
            probs: [
                (Action::IDLE, 1.0 - theta),
                (single, theta * alpha),
                (double, theta * (1.0 - alpha)),
            ],
            lambda,
            p_success,
            avg_aoi: if p_success > 0.0 {
                1.0 / p_success
            } else {
                f64::INFINITY
            },
        }),
    })
}

/// Energy budget matching a per-pool load `G`: `R T_f G / (N-1)`.
pub fn budget_from_load(load: f64, pop: &PopulationConfig) -> f64 {
    pop.energy_for_load(load)
}

/// Empirical AoI of the single-device reset chain under an action mix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiEstimate {
    pub mean: f64,
    /// Batch-means standard error of `mean`.
    pub std_err: f64,
    /// Aggregate per-frame success `Σ r_i p̂(a_i; Λ)`.
    pub p: f64,
    pub frames: u64,
}

impl AoiEstimate {
    /// `1 / p`, or infinite when nothing can be delivered.
    pub fn analytic(&self) -> f64 {
        if self.p > 0.0 {
            1.0 / self.p
        } else {
            f64::INFINITY
        }
    }
}

pub const MIN_CHAIN_FRAMES: u64 = 10_000;
const BATCHES: u64 = 50;

/// Simulates the reset chain: each frame the device draws an action from the
/// mix and delivers with probability `p̂(a; Λ)`, where `Λ` is the load
/// induced by the mix's energy. AoI is capped at `delta_max`.
pub fn baseline_aoi_simulation_check(
    mix: &[(Action, f64)],
    table: &SuccessTable,
    pop: &PopulationConfig,
    frames: u64,
    delta_max: u32,
    seed: u64,
) -> Result<AoiEstimate, BaselineError> {
    if frames < MIN_CHAIN_FRAMES {
        return Err(BaselineError::TooFewFrames {
            min: MIN_CHAIN_FRAMES,
            got: frames,
        });
    }
    let total: f64 = mix.iter().map(|(_, r)| r).sum();
    if mix.is_empty() || mix.iter().any(|(_, r)| !(*r >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(BaselineError::InvalidMix(format!(
            "weights must be >= 0 and sum to 1, got {total}"
        )));
    }
    let energy: f64 = mix.iter().map(|(a, r)| r * f64::from(a.energy())).sum();
    let lambda = pop.load_for_energy(energy);
    let success = mix
        .iter()
        .map(|(a, _)| table.success_prob(*a, lambda))
        .collect::<Result<Vec<_>, _>>()?;
    let p = mix.iter().zip(&success).map(|((_, r), s)| r * s).sum();
    let picker =
        WeightedIndex::new(mix.iter().map(|(_, r)| *r)).map_err(|e| BaselineError::InvalidMix(e.to_string()))?;

    let mut rng = stream_rng(seed, 0);
    let batch_len = frames / BATCHES;
    let mut batch_means = Vec::with_capacity(BATCHES as usize);
    let mut delta: u32 = 1;
    let mut sum = 0.0;
    for _ in 0..BATCHES {
        let mut batch_sum = 0.0;
        for _ in 0..batch_len {
            batch_sum += f64::from(delta);
            let a = picker.sample(&mut rng);
            delta = if rng.random::<f64>() < success[a] {
                1
            } else {
                (delta + 1).min(delta_max)
            };
        }
        sum += batch_sum;
        batch_means.push(batch_sum / batch_len as f64);
    }
    let used = batch_len * BATCHES;
    let mean = sum / used as f64;
    let var = batch_means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(AoiEstimate {
        mean,
        std_err: (var / BATCHES as f64).sqrt(),
        p,
        frames: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::action_set;
    use crate::calibration::{random_table, table_from_rows};
    use crate::mdp::simplex::{solve, LinearProgram};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pop() -> PopulationConfig {
        PopulationConfig::new(30, 3, 1.0).unwrap()
    }

    fn flat_table(p11: f64, p21: f64) -> SuccessTable {
        table_from_rows(
            vec![0.0, 30.0],
            vec![Action::IDLE, Action::new(1, 1), Action::new(2, 1)],
            vec![vec![0.0; 2], vec![p11; 2], vec![p21; 2]],
        )
        .unwrap()
    }

    #[test]
    fn zero_budget_idles() {
        let b = randomized_lp(&flat_table(0.6, 0.8), 0.0, &pop()).unwrap();
        assert_eq!(b.mix, vec![(Action::IDLE, 1.0)]);
        assert_eq!(b.p_star, 0.0);
        assert!(b.avg_aoi.is_infinite());
        assert!(!b.reaches_success());
    }

    #[test]
    fn single_point_support() {
        let b = randomized_lp(&flat_table(0.6, 0.8), 1.0, &pop()).unwrap();
        assert_eq!(b.mix, vec![(Action::new(1, 1), 1.0)]);
        assert!((b.avg_aoi - 1.0 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn energy_outside_range_rejected() {
        assert!(randomized_lp(&flat_table(0.6, 0.8), 2.5, &pop()).is_err());
        assert!(randomized_lp(&flat_table(0.6, 0.8), -0.1, &pop()).is_err());
    }

    #[test]
    fn enumeration_matches_grid_and_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let actions = action_set(3, 3);
        let grid: Vec<f64> = (0..=12).map(|i| f64::from(i) * 2.0).collect();
        let pop = pop();
        for _ in 0..20 {
            let table = random_table(&actions, &grid, &mut rng);
            let c: f64 = rng.random_range(0.0..9.0);
            let got = randomized_lp(&table, c, &pop).unwrap();
            let mix_energy: f64 = got.mix.iter().map(|(a, r)| r * f64::from(a.energy())).sum();
            assert!((mix_energy - c).abs() < 1e-10);

            let p = table.success_probs(pop.load_for_energy(c));
            let e: Vec<f64> = actions.iter().map(|a| f64::from(a.energy())).collect();
            // 0.001 grid over every pair of actions
            let mut brute = f64::NEG_INFINITY;
            for i in 0..e.len() {
                for j in 0..e.len() {
                    for k in 0..=1000 {
                        let r = f64::from(k) / 1000.0;
                        let energy = (1.0 - r) * e[i] + r * e[j];
                        if (energy - c).abs() <= 0.01 * (e[j] - e[i]).abs().max(1.0) {
                            brute = brute.max((1.0 - r) * p[i] + r * p[j]);
                        }
                    }
                }
            }
            assert!(got.p_star >= brute - 0.01, "{} vs grid {}", got.p_star, brute);

            let lp = LinearProgram {
                a: vec![vec![1.0; e.len()], e.clone()],
                b: vec![1.0, c],
                c: p.iter().map(|x| -x).collect(),
            };
            let exact = -solve(&lp).unwrap().objective;
            assert!((got.p_star - exact).abs() < 1e-9, "{} vs simplex {}", got.p_star, exact);
        }
    }

    #[test]
    fn irsa_examples() {
        let table = flat_table(0.6, 0.8);
        let b = irsa_baseline(0.5, 0.75, &table, &pop()).unwrap();
        let mix = b.mix.unwrap();
        assert_eq!(mix.theta, 0.5);
        assert_eq!(mix.probs.map(|(_, r)| r), [0.5, 0.25, 0.25]);
        assert!((mix.average_energy() - 0.75).abs() < 1e-15);
        assert!((mix.p_success - 0.5 * (0.5 * 0.6 + 0.5 * 0.8)).abs() < 1e-15);

        let b = irsa_baseline(0.9, 1.2, &table, &pop()).unwrap();
        assert!(!b.feasible && b.mix.is_none());
        assert!(irsa_baseline(1.0, 0.5, &table, &pop()).is_err());
        assert!((budget_from_load(29.0 / 3.0, &pop()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reset_chain_mean_matches_geometric() {
        let table = flat_table(0.5, 0.8);
        let est =
            baseline_aoi_simulation_check(&[(Action::new(1, 1), 1.0)], &table, &pop(), 1_000_000, u32::MAX, 3).unwrap();
        assert_eq!(est.p, 0.5);
        assert!((1.96..=2.04).contains(&est.mean), "mean {}", est.mean);
        assert!((est.mean - est.analytic()).abs() <= 3.0 * est.std_err);
    }

    #[test]
    fn idle_chain_sticks_at_cap() {
        let table = flat_table(0.5, 0.8);
        let est = baseline_aoi_simulation_check(&[(Action::IDLE, 1.0)], &table, &pop(), 10_000, 50, 1).unwrap();
        assert_eq!(est.p, 0.0);
        // 1 + 2 + ... + 50 then 50 forever
        let expected = (1275.0 + 50.0 * (10_000.0 - 50.0)) / 10_000.0;
        assert!((est.mean - expected).abs() < 1e-9);
    }

    #[test]
    fn chain_rejects_bad_input() {
        let table = flat_table(0.5, 0.8);
        let pop = pop();
        assert!(baseline_aoi_simulation_check(&[(Action::IDLE, 1.0)], &table, &pop, 100, 50, 1).is_err());
        assert!(baseline_aoi_simulation_check(&[(Action::IDLE, 0.5)], &table, &pop, 10_000, 50, 1).is_err());
    }
}
