use mfaoi::baselines::{irsa_baseline, randomized_lp};
use mfaoi::calibration::random_table;
use mfaoi::experiments::random_model;
use mfaoi::mdp::{extract_structure, filter_dominated, occupation_lp_solve};
use mfaoi::mean_field::{stationary_from_success, stationary_metrics};
use mfaoi::rng::stream_rng;
use mfaoi::{action_set, relative_value_iteration, Action, PopulationConfig, RviOptions};
use proptest::prelude::*;

fn pop() -> PopulationConfig {
    PopulationConfig::new(30, 3, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_a_distribution(p in proptest::collection::vec(0.0f64..=1.0, 2..60)) {
        let s = stationary_from_success(&p);
        let total: f64 = s.m.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(s.m.iter().all(|&x| x >= 0.0));
        let (aoi, _) = stationary_metrics(&s.m, &vec![Action::IDLE; p.len()]);
        prop_assert!(aoi >= 1.0 && aoi <= p.len() as f64 + 1e-9);
    }

    #[test]
    fn rvi_matches_linear_program(seed in 0u64..10_000, delta_max in 2u32..=15, eta in 0.0f64..3.0) {
        let mut rng = stream_rng(seed, 0);
        let model = random_model(&mut rng, delta_max, eta);
        let rvi = relative_value_iteration(&model, &RviOptions::default(), None).unwrap();
        let lp = occupation_lp_solve(&model).unwrap();
        prop_assert!((rvi.rho - lp.rho).abs() <= 1e-6, "rvi {} lp {}", rvi.rho, lp.rho);
        let mass: f64 = lp.m.iter().sum();
        prop_assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn filtered_models_have_threshold_structure(seed in 0u64..10_000, eta in 0.0f64..3.0) {
        let mut rng = stream_rng(seed, 1);
        let full = random_model(&mut rng, 25, eta);
        let chain = filter_dominated(&full.actions, &full.p);
        let model = full.restrict(&chain);
        for w in model.actions.windows(2).zip(model.p.windows(2)) {
            prop_assert!(w.0[0].energy() < w.0[1].energy() && w.1[0] < w.1[1]);
        }
        let sol = relative_value_iteration(&model, &RviOptions::default(), None).unwrap();
        let report = extract_structure(&model, &sol);
        prop_assert!(report.h_monotone && report.threshold_ordered);
        prop_assert!(sol.policy.windows(2).all(|w| w[0].energy() <= w[1].energy()));
    }

    #[test]
    fn randomized_mix_spends_the_requested_energy(seed in 0u64..1000, frac in 0.0f64..=1.0) {
        let mut rng = stream_rng(seed, 2);
        let table = random_table(&action_set(3, 3), &[0.0, 4.0, 8.0, 16.0, 24.0], &mut rng);
        let energy = 9.0 * frac;
        let b = randomized_lp(&table, energy, &pop()).unwrap();
        let spent: f64 = b.mix.iter().map(|(a, r)| r * f64::from(a.energy())).sum();
        let total: f64 = b.mix.iter().map(|(_, r)| r).sum();
        prop_assert!((spent - energy).abs() < 1e-9 && (total - 1.0).abs() < 1e-12);
        prop_assert!(b.mix.len() <= 2);
        // no single action at that energy does better
        for a in table.actions.iter().filter(|a| f64::from(a.energy()) == energy) {
            prop_assert!(table.success_prob(*a, b.lambda).unwrap() <= b.p_star + 1e-12);
        }
    }

    #[test]
    fn repetition_mix_is_energy_matched(seed in 0u64..1000, alpha in 0.01f64..0.99, frac in 0.0f64..=1.0) {
        let mut rng = stream_rng(seed, 3);
        let table = random_table(&action_set(3, 3), &[0.0, 12.0, 24.0], &mut rng);
        let budget = (2.0 - alpha) * frac;
        let b = irsa_baseline(alpha, budget, &table, &pop()).unwrap();
        let mix = b.mix.unwrap();
        prop_assert!((mix.average_energy() - budget).abs() <= 1e-12);
        prop_assert!((mix.probs.iter().map(|(_, r)| r).sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
