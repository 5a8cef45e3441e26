//! Property suites for the objectives: analytic gradients must match
//! central finite differences, and the closed-form optimum must dominate
//! everything else and sit at a stationary point.

use proptest::prelude::*;
use rlvrsim_core::{
    accuracy, optimal_policy_closed_form, rlvr_grad, rlvr_objective, sft_flow_direction, sft_loss,
    PatternTask, PolicyState,
};

const FD_STEP: f64 = 1e-5;

fn rates_strategy(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    (2..=max_k).prop_flat_map(|k| proptest::collection::vec(0.0..=1.0f64, k))
}

fn logits_strategy(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-4.0..4.0f64, k)
}

/// Task, state, reference, and target of matching dimension.
fn instance_strategy(
    max_k: usize,
) -> impl Strategy<Value = (PatternTask, PolicyState, PolicyState, Vec<f64>)> {
    rates_strategy(max_k).prop_flat_map(|rates| {
        let k = rates.len();
        (
            Just(rates),
            logits_strategy(k),
            logits_strategy(k),
            logits_strategy(k),
        )
            .prop_map(|(rates, state, reference, target)| {
                let task = PatternTask::from_rates(&rates).expect("rates lie in range");
                let state = PolicyState::from_logits(&state).expect("finite logits");
                let reference = PolicyState::from_logits(&reference).expect("finite logits");
                let target = PolicyState::from_logits(&target).expect("finite logits");
                (task, state, reference, target.probs().to_vec())
            })
    })
}

/// Central finite difference of `f` along each logit coordinate. The
/// objectives are invariant under uniform logit shifts, so the
/// re-centring inside `from_logits` does not disturb the quotient.
fn numeric_grad(state: &PolicyState, mut f: impl FnMut(&PolicyState) -> f64) -> Vec<f64> {
    (0..state.k())
        .map(|i| {
            let mut up = state.logits().to_vec();
            up[i] += FD_STEP;
            let mut down = state.logits().to_vec();
            down[i] -= FD_STEP;
            let up = PolicyState::from_logits(&up).expect("finite logits");
            let down = PolicyState::from_logits(&down).expect("finite logits");
            (f(&up) - f(&down)) / (2.0 * FD_STEP)
        })
        .collect()
}

fn assert_grad_close(analytic: &[f64], numeric: &[f64]) {
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let err = (a - n).abs();
        let ok = err < 1e-9 || err < 1e-6 * a.abs().max(n.abs());
        assert!(ok, "entry {i}: analytic {a}, numeric {n}, error {err}");
    }
}

proptest! {
    #[test]
    fn reward_gradient_matches_finite_differences(
        (task, state, reference, _) in instance_strategy(5),
        beta in 0.0..2.0f64,
    ) {
        let analytic = rlvr_grad(&task, &state, &reference, beta).unwrap();
        let numeric = numeric_grad(&state, |s| {
            rlvr_objective(&task, s, &reference, beta).unwrap()
        });
        assert_grad_close(&analytic.entries, &numeric);
    }

    #[test]
    fn supervised_direction_is_the_ascent_gradient_of_negative_loss(
        (task, state, _, target) in instance_strategy(5),
    ) {
        let _ = task;
        let analytic = sft_flow_direction(&target, &state).unwrap();
        let numeric = numeric_grad(&state, |s| -sft_loss(&target, s).unwrap());
        assert_grad_close(&analytic.entries, &numeric);
    }

    #[test]
    fn closed_form_optimum_dominates_and_is_stationary(
        (task, challenger, reference, _) in instance_strategy(4),
        beta in 0.05..2.0f64,
    ) {
        let opt = optimal_policy_closed_form(&task, reference.probs(), beta).unwrap();
        let opt_state = PolicyState::from_probs(&opt).unwrap();
        let best = rlvr_objective(&task, &opt_state, &reference, beta).unwrap();

        let challenged = rlvr_objective(&task, &challenger, &reference, beta).unwrap();
        prop_assert!(
            best >= challenged - 1e-9,
            "challenger beats the optimum: {challenged} > {best}"
        );

        let grad = rlvr_grad(&task, &opt_state, &reference, beta).unwrap();
        prop_assert!(
            grad.inf_norm() < 1e-7,
            "gradient at the optimum has norm {}",
            grad.inf_norm()
        );
    }

    #[test]
    fn objective_at_the_reference_is_its_accuracy(
        (task, _, reference, _) in instance_strategy(5),
        beta in 0.0..2.0f64,
    ) {
        let phi = rlvr_objective(&task, &reference, &reference, beta).unwrap();
        let acc = accuracy(&task, reference.probs()).unwrap();
        prop_assert!((phi - acc).abs() < 1e-12, "{phi} vs {acc}");
    }
}
