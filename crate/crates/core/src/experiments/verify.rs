use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::action::{action_set, Action};
use crate::mdp::{
    extract_structure, filter_dominated, occupation_lp_solve, relative_value_iteration, MdpModel, RviOptions,
};
use crate::mean_field::{stationary_from_success, stationary_metrics};
use crate::phy::RicianFading;
use crate::rng::{stream_rng, SimRng};

/// Largest truncation used for the LP oracle.
const LP_DELTA_MAX: u32 = 20;
const ETAS: [f64; 3] = [0.0, 0.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Random model with 2 to 5 distinct actions from the default action set,
/// success drawn uniformly from `[0, 1]` (zero for idle).
pub fn random_model(rng: &mut SimRng, delta_max: u32, eta: f64) -> MdpModel {
    let all = action_set(3, 3);
    let k = rng.random_range(2..=5);
    let mut picked: Vec<Action> = index::sample(rng, all.len(), k).into_iter().map(|i| all[i]).collect();
    picked.sort();
    let p = picked
        .iter()
        .map(|a| if a.is_idle() { 0.0 } else { rng.random::<f64>() })
        .collect();
    MdpModel::new(picked, p, eta, delta_max).expect("valid random model")
}

/// `|ρ_RVI - ρ_LP| <= 1e-6` on `models` random models.
pub fn check_lp_vs_rvi(models: usize, delta_max: u32, seed: u64) -> CheckOutcome {
    let delta_max = delta_max.clamp(2, LP_DELTA_MAX);
    let mut rng = stream_rng(seed, 1);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..models {
        let model = random_model(&mut rng, delta_max, ETAS[i % ETAS.len()]);
        let gap = match (
            relative_value_iteration(&model, &RviOptions::default(), None),
            occupation_lp_solve(&model),
        ) {
            (Ok(rvi), Ok(lp)) => (rvi.rho - lp.rho).abs(),
            (r, l) => {
                failures.push(format!("model {i}: {:?} / {:?}", r.err(), l.err()));
                continue;
            }
        };
        worst = worst.max(gap);
        if gap > 1e-6 {
            failures.push(format!("model {i}: gap {gap:e}"));
        }
    }
    CheckOutcome::new(
        "lp_vs_rvi",
        failures.is_empty(),
        format!(
            "{models} models, delta_max {delta_max}, max |rho gap| {worst:e} {}",
            failures.join("; ")
        ),
    )
}

/// On dominance-filtered random models: `h` nondecreasing, the policy
/// climbs the action chain, and no dominated action is chosen.
pub fn check_structure(models: usize, delta_max: u32, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = stream_rng(seed, 2);
    let (mut h_bad, mut order_bad, mut dom_bad) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..models {
        let eta = rng.random_range(0.0..3.0);
        let full = random_model(&mut rng, delta_max.max(2), eta);
        let model = full.restrict(&filter_dominated(&full.actions, &full.p));
        let Ok(sol) = relative_value_iteration(&model, &RviOptions::default(), None) else {
            h_bad.push(i);
            continue;
        };
        let report = extract_structure(&model, &sol);
        if !report.h_monotone {
            h_bad.push(i);
        }
        if !report.threshold_ordered || !report.argmin_mismatches.is_empty() {
            order_bad.push(i);
        }
        if !report.dominated_choices.is_empty() {
            dom_bad.push(i);
        }
    }
    let outcome = |name: &str, bad: Vec<usize>| {
        CheckOutcome::new(name, bad.is_empty(), format!("{models} models, failing: {bad:?}"))
    };
    vec![
        outcome("h_monotone", h_bad),
        outcome("threshold_ordering", order_bad),
        outcome("no_dominated_choice", dom_bad),
    ]
}

/// Unfiltered models never select a dominated action.
pub fn check_dominance(models: usize, delta_max: u32, seed: u64) -> CheckOutcome {
    let mut rng = stream_rng(seed, 3);
    let mut bad = Vec::new();
    for i in 0..models {
        let eta = rng.random_range(0.0..3.0);
        let model = random_model(&mut rng, delta_max.max(2), eta);
        let chain = filter_dominated(&model.actions, &model.p);
        match relative_value_iteration(&model, &RviOptions::default(), None) {
            Ok(sol) if sol.policy_index.iter().all(|a| chain.contains(a)) => {}
            _ => bad.push(i),
        }
    }
    CheckOutcome::new(
        "dominance_exclusion",
        bad.is_empty(),
        format!("{models} models, failing: {bad:?}"),
    )
}

/// Closed-form stationary law against power iteration of the chain, plus
/// the geometric mean `1/p`.
pub fn check_stationary(models: usize, delta_max: u32, seed: u64) -> CheckOutcome {
    let mut rng = stream_rng(seed, 4);
    let n = delta_max.max(2) as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..models {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let closed = stationary_from_success(&p).m;
        let mut m = vec![1.0 / n as f64; n];
        for _ in 0..200_000 {
            let mut next = vec![0.0; n];
            for s in 0..n {
                next[0] += m[s] * p[s];
                next[(s + 1).min(n - 1)] += m[s] * (1.0 - p[s]);
            }
            // lazy step keeps the iteration aperiodic
            let change: f64 = m.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            m.iter_mut().zip(&next).for_each(|(a, b)| *a = 0.5 * (*a + b));
            if change < 1e-15 {
                break;
            }
        }
        let gap = closed.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>();
        worst = worst.max(gap);
    }
    let geo = stationary_from_success(&vec![0.5; 200]).m;
    let (mean, _) = stationary_metrics(&geo, &vec![Action::new(1, 1); 200]);
    let geo_gap = (mean - 2.0).abs();
    CheckOutcome::new(
        "stationary_closed_form",
        worst <= 1e-9 && geo_gap <= 1e-9,
        format!("max L1 gap {worst:e}, geometric mean gap {geo_gap:e}"),
    )
}

/// `E|h|^2 = 1` for the Rician model, within four standard errors.
pub fn check_fading(draws: u64, seed: u64) -> CheckOutcome {
    let fading = RicianFading::new(crate::config::DEFAULT_RICIAN_K);
    let mut rng = stream_rng(seed, 5);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let g = fading.sample(&mut rng);
        sum += g;
        sq += g * g;
    }
    let n = draws as f64;
    let mean = sum / n;
    let se = ((sq / n - mean * mean) / n).sqrt();
    CheckOutcome::new(
        "fading_normalization",
        (mean - 1.0).abs() <= 4.0 * se,
        format!("mean {mean:.6} over {draws} draws, se {se:.2e}"),
    )
}

/// Full oracle suite used by the `verify` subcommand.
pub fn verify_suite(delta_max: u32, seed: u64) -> VerifyReport {
    let mut checks = vec![check_lp_vs_rvi(25, delta_max, seed)];
    checks.extend(check_structure(50, delta_max, seed));
    checks.push(check_dominance(50, delta_max, seed));
    checks.push(check_stationary(20, delta_max, seed));
    checks.push(check_fading(1_000_000, seed));
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_are_varied_and_valid() {
        let mut rng = stream_rng(0, 0);
        for _ in 0..100 {
            let m = random_model(&mut rng, 10, 1.0);
            assert!((2..=5).contains(&m.n_actions()));
        }
    }

    #[test]
    fn suite_passes_small() {
        let report = verify_suite(12, 7);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(report.checks.len(), 7);
    }
}
