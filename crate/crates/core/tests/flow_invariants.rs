//! Property suites for the integrator: structural guarantees on every
//! recorded sample, and agreement with the closed-form optimum for
//! regularised flows.

use proptest::prelude::*;
use rlvrsim_core::{integrate, optimal_policy_closed_form, PatternTask, PolicyState, Scenario};

fn rates_strategy(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    (2..=max_k).prop_flat_map(|k| proptest::collection::vec(0.0..=1.0f64, k))
}

fn scenario_strategy(beta: impl Strategy<Value = f64>) -> impl Strategy<Value = Scenario> {
    (rates_strategy(4), beta).prop_flat_map(|(rates, beta)| {
        let k = rates.len();
        (
            Just(rates),
            Just(beta),
            proptest::collection::vec(-3.0..3.0f64, k),
        )
            .prop_map(|(rates, beta, ref_logits)| {
                let task = PatternTask::from_rates(&rates).expect("rates lie in range");
                let reference = PolicyState::from_logits(&ref_logits).expect("finite logits");
                Scenario::rlvr(task, reference, beta).expect("valid scenario")
            })
    })
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

proptest! {
    // Long-horizon integrations dominate the runtime; fewer, richer cases.
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unregularised_trajectories_keep_their_structural_guarantees(
        scenario in scenario_strategy(Just(0.0)),
    ) {
        let scenario = scenario.with_horizon(20.0).unwrap();
        let trajectory = integrate(&scenario).unwrap();
        let samples = &trajectory.samples;
        prop_assert!(!samples.is_empty());

        let lo = scenario.task.succ().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scenario.task.succ().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for pair in samples.windows(2) {
            prop_assert!(pair[1].t > pair[0].t, "time must strictly increase");
            prop_assert!(
                pair[1].acc >= pair[0].acc - 1e-9,
                "accuracy decreased: {} -> {}",
                pair[0].acc,
                pair[1].acc
            );
        }
        for s in samples {
            let sum: f64 = s.probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum {} at t={}", sum, s.t);
            prop_assert!(s.probs.iter().all(|&p| p >= 0.0));
            prop_assert!(s.acc >= lo - 1e-9 && s.acc <= hi + 1e-9);
            prop_assert!(s.dacc >= -1e-12, "negative velocity {} at t={}", s.dacc, s.t);
        }
    }

    #[test]
    fn regularised_flows_settle_on_the_closed_form_optimum(
        scenario in scenario_strategy(0.2..2.0f64),
    ) {
        let opt = optimal_policy_closed_form(
            &scenario.task,
            scenario.ref_state.probs(),
            scenario.beta,
        )
        .unwrap();
        // The flow mixes at a rate of order beta times the smallest
        // optimal probability; budget fifty time constants (the
        // integrator stops early once the field vanishes anyway).
        let min_opt = opt.iter().cloned().fold(f64::INFINITY, f64::min);
        let horizon = (50.0 / (scenario.beta * min_opt)).min(1e6);
        let scenario = scenario.with_horizon(horizon).unwrap();
        let trajectory = integrate(&scenario).unwrap();
        let tv = total_variation(&trajectory.last().probs, &opt);
        prop_assert!(tv < 1e-4, "TV to the optimum is {tv} (horizon {horizon})");
    }
}
