//! Two-stage training pipeline: a supervised warm-start run for its
//! budgeted duration, followed by verified-reward training from the
//! warm-started policy, compared against training from the raw reference.

use rlvrsim_core::{
    accuracy, bound_t0, bound_t1, bound_t1_sft, classify_regime, first_crossing, integrate,
    CrossingKind, Error, Mode, PolicyState, Regime, Scenario,
};
use serde::Serialize;

use crate::error::{Result, RunnerError};

/// Probability level the best pattern must exceed in both branches.
const TAKE_OVER_LEVEL: f64 = 0.9;

/// Simulation-time cap per branch; times at the cap are censored.
const TIME_CAP: f64 = 1e6;

/// Warm-start budgets at or below this are treated as a no-op stage.
const NO_OP_BUDGET: f64 = 1e-12;

/// Everything the two-branch comparison produces.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    /// Tolerance the budgets are computed for.
    pub epsilon: f64,
    /// Probability level defining "taken over" in both branches.
    pub take_over_level: f64,
    /// Supervised-stage budget.
    pub t1_sft: f64,
    /// Accuracy of the supervised target distribution itself.
    pub ideal_sft_acc: f64,
    /// Policy at the end of the supervised stage.
    pub post_sft_probs: Vec<f64>,
    /// Accuracy at the end of the supervised stage.
    pub post_sft_acc: f64,
    /// Worst remaining shortfall against the supervised target.
    pub post_sft_sup_gap: f64,
    /// Whether the warm-started policy is in the direct regime.
    pub post_sft_regime1: bool,
    /// Concentration budget from the warm-started policy, when direct.
    pub t1_post_sft: Option<f64>,
    /// Total guarantee for the pipeline: warm-start budget plus the
    /// post-warm-start concentration budget.
    pub pipeline_bound: Option<f64>,
    /// log10 of the hand-over bound for the raw reference, when entangled.
    pub t0_log10_pure: Option<f64>,
    /// Simulated time for warm start plus reward training to exceed the
    /// take-over level.
    pub combined_time: f64,
    /// True when the combined branch hit the time cap first.
    pub combined_censored: bool,
    /// Simulated time for reward training alone to exceed the take-over
    /// level.
    pub pure_time: f64,
    /// True when the pure branch hit the time cap first.
    pub pure_censored: bool,
}

fn crossing_time(
    scenario: &Scenario,
    star: usize,
) -> Result<(f64, bool)> {
    let trajectory = integrate(scenario)?;
    match first_crossing(&trajectory, CrossingKind::PatternProbAbove(star), TAKE_OVER_LEVEL)? {
        Some(t) => Ok((t, false)),
        None => Ok((TIME_CAP, true)),
    }
}

/// Runs the warm-start comparison for a reward-training scenario whose
/// reference is not already in the direct regime.
///
/// Branch one runs the supervised flow toward `p_sft` for its budgeted
/// duration, then reward training from (and regularised toward) the
/// warm-started policy. Branch two runs reward training from the raw
/// reference. Both branches are timed to the best pattern's probability
/// exceeding 0.9, capped at 1e6 time units.
pub fn run_pipeline(scenario: &Scenario, p_sft: &[f64], epsilon: f64) -> Result<PipelineReport> {
    if scenario.mode != Mode::RlvrFlow {
        return Err(RunnerError::Validation(format!(
            "the pipeline comparison needs a reward-flow scenario, got mode {:?}",
            scenario.mode.as_str()
        )));
    }
    let task = &scenario.task;
    let star = task.r_star()?;
    let ref_probs = scenario.ref_state.probs();
    let ref_class = classify_regime(task, ref_probs)?;
    if ref_class.regime == Regime::Regime1 {
        return Err(RunnerError::Validation(
            "the reference is already in the direct regime; a warm start has nothing to fix"
                .into(),
        ));
    }

    let t1_sft = bound_t1_sft(p_sft, &scenario.ref_state, epsilon)?;
    let ideal_sft_acc = accuracy(task, p_sft)?;

    // Branch one, stage one: supervised flow for its budgeted duration.
    let post_sft_probs: Vec<f64> = if t1_sft > NO_OP_BUDGET {
        let sft_scenario = Scenario::sft(task.clone(), scenario.ref_state.clone(), p_sft.to_vec())?
            .with_horizon(t1_sft)?
            .with_step(scenario.step)?
            .with_record_stride(scenario.record_stride)?;
        let sft_trajectory = integrate(&sft_scenario)?;
        sft_trajectory.last().probs.clone()
    } else {
        ref_probs.to_vec()
    };
    let post_sft_state = PolicyState::from_probs(&post_sft_probs)?;
    let post_sft_acc = accuracy(task, &post_sft_probs)?;
    let post_sft_sup_gap = p_sft
        .iter()
        .zip(&post_sft_probs)
        .map(|(&target, &got)| target - got)
        .fold(f64::NEG_INFINITY, f64::max);
    let post_class = classify_regime(task, &post_sft_probs)?;
    let post_sft_regime1 = post_class.regime == Regime::Regime1;
    let t1_post_sft = if post_sft_regime1 {
        Some(bound_t1(task, &post_sft_probs, epsilon)?.time)
    } else {
        None
    };
    let pipeline_bound = t1_post_sft.map(|t| t1_sft + t);
    let t0_log10_pure = if ref_class.regime == Regime::Regime2 {
        match bound_t0(task, ref_probs) {
            Ok(b) => Some(b.log10),
            Err(Error::DegenerateBound(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };

    // Branch one, stage two: reward training from the warm-started
    // policy, regularised toward it.
    let combined_scenario = Scenario::rlvr(task.clone(), post_sft_state, scenario.beta)?
        .with_horizon(TIME_CAP)?
        .with_step(scenario.step)?
        .with_record_stride(scenario.record_stride)?;
    let (reward_time, combined_censored) = crossing_time(&combined_scenario, star)?;
    let combined_time = t1_sft + reward_time;

    // Branch two: reward training from the raw reference.
    let pure_scenario = Scenario::rlvr(task.clone(), scenario.ref_state.clone(), scenario.beta)?
        .with_horizon(TIME_CAP)?
        .with_step(scenario.step)?
        .with_record_stride(scenario.record_stride)?;
    let (pure_time, pure_censored) = crossing_time(&pure_scenario, star)?;

    Ok(PipelineReport {
        epsilon,
        take_over_level: TAKE_OVER_LEVEL,
        t1_sft,
        ideal_sft_acc,
        post_sft_probs,
        post_sft_acc,
        post_sft_sup_gap,
        post_sft_regime1,
        t1_post_sft,
        pipeline_bound,
        t0_log10_pure,
        combined_time,
        combined_censored,
        pure_time,
        pure_censored,
    })
}
