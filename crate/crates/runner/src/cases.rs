//! Named, reproducible case studies: a frozen scenario plus the outcome
//! checks that make the run meaningful, keyed by name in a registry.

use std::path::Path;

use rlvrsim_core::{
    first_crossing, integrate, verify_trajectory, CrossingKind, PatternTask, PolicyState,
    RegimeReport, Scenario, T0Value, Trajectory,
};

use crate::csvio::{emit_csv, write_atomic};
use crate::error::{Result, RunnerError};
use crate::report::ReportDoc;
use crate::scenario::serialize_scenario;

/// Tolerance passed to the verifier for every case study.
const CASE_EPSILON: f64 = 0.05;

/// Horizon cap shared by the entangled cases.
const ENTANGLED_HORIZON: f64 = 1e6;

/// An outcome probe: returns (pass, worst_violation) for one expectation.
type ExpectationFn = fn(&Scenario, &Trajectory, &RegimeReport) -> Result<(bool, f64)>;

/// A frozen scenario with named expectations about its outcome.
pub struct CaseStudy {
    pub name: &'static str,
    pub summary: &'static str,
    pub scenario: Scenario,
    expectations: Vec<(&'static str, ExpectationFn)>,
}

fn three_pattern_task() -> PatternTask {
    PatternTask::from_rates(&[0.9, 0.6, 0.1]).expect("distinct rates are well posed")
}

fn direct_reference_case() -> CaseStudy {
    let scenario = Scenario::rlvr(
        three_pattern_task(),
        PolicyState::from_probs(&[0.5, 0.3, 0.2]).expect("valid distribution"),
        0.0,
    )
    .expect("valid configuration")
    // The unregularised tail flattens like 1/t, so the residual-based
    // convergence cutoff only fires around t ~ 1e11; give it room.
    .with_horizon(1e12)
    .expect("positive horizon");
    CaseStudy {
        name: "regime1_fast",
        summary: "direct-regime start; the best pattern takes over without a detour",
        scenario,
        expectations: vec![
            ("converged_before_horizon", expect_converged),
            ("final_pi_star_above_0.99", expect_final_pi_star_high),
        ],
    }
}

fn entangled_gamma6_case() -> CaseStudy {
    let scenario = Scenario::rlvr(
        three_pattern_task(),
        PolicyState::from_probs(&[0.05, 0.70, 0.25]).expect("valid distribution"),
        0.0,
    )
    .expect("valid configuration")
    .with_horizon(ENTANGLED_HORIZON)
    .expect("positive horizon")
    .with_record_stride(5)
    .expect("positive stride");
    CaseStudy {
        name: "regime2_entangled_gamma6",
        summary: "entangled start with imbalance ratio 6; mass detours through the runner-up",
        scenario,
        expectations: vec![
            ("gamma_is_exactly_six", expect_gamma_six),
            ("t0_log10_matches_oracle", expect_t0_log10_oracle),
            ("final_pi_star_above_0.99", expect_final_pi_star_high),
            ("entangled_delay_at_least_10x_direct", expect_entanglement_ratio),
        ],
    }
}

fn entangled_small_t0_case() -> CaseStudy {
    let scenario = Scenario::rlvr(
        PatternTask::from_rates(&[0.95, 0.5, 0.05]).expect("distinct rates are well posed"),
        PolicyState::from_probs(&[0.15, 0.65, 0.20]).expect("valid distribution"),
        0.0,
    )
    .expect("valid configuration")
    .with_horizon(3e4)
    .expect("positive horizon")
    .with_record_stride(5)
    .expect("positive stride");
    CaseStudy {
        name: "regime2_small_t0",
        summary: "entangled start whose hand-over bound fits inside the simulated horizon",
        scenario,
        expectations: vec![
            ("t0_matches_oracle", expect_t0_small_oracle),
            ("acc_at_t0_exceeds_runner_up", expect_hand_over_check),
        ],
    }
}

/// All case studies, in presentation order.
pub fn registry() -> Vec<CaseStudy> {
    vec![
        direct_reference_case(),
        entangled_gamma6_case(),
        entangled_small_t0_case(),
    ]
}

/// Names of all registered case studies.
pub fn case_names() -> Vec<&'static str> {
    registry().iter().map(|c| c.name).collect()
}

fn expect_converged(
    _scenario: &Scenario,
    trajectory: &Trajectory,
    _report: &RegimeReport,
) -> Result<(bool, f64)> {
    Ok((trajectory.converged, if trajectory.converged { 0.0 } else { 1.0 }))
}

fn expect_final_pi_star_high(
    scenario: &Scenario,
    trajectory: &Trajectory,
    _report: &RegimeReport,
) -> Result<(bool, f64)> {
    let star = scenario.task.r_star()?;
    let value = trajectory.last().probs[star];
    Ok((value > 0.99, (0.99 - value).max(0.0)))
}

fn expect_gamma_six(
    _scenario: &Scenario,
    _trajectory: &Trajectory,
    report: &RegimeReport,
) -> Result<(bool, f64)> {
    match report.gamma {
        // The reference odds sum to 6 in exact arithmetic and the float
        // evaluation lands on it exactly; demand equality, not closeness.
        Some(g) => Ok((g == 6.0, (g - 6.0).abs())),
        None => Ok((false, f64::INFINITY)),
    }
}

fn expect_t0_log10_oracle(
    _scenario: &Scenario,
    _trajectory: &Trajectory,
    report: &RegimeReport,
) -> Result<(bool, f64)> {
    // High-precision evaluation of the hand-over bound's magnitude for
    // this configuration.
    const ORACLE_LOG10: f64 = 43.389098591521349;
    const TOL: f64 = 0.01;
    match report.t0_log10 {
        Some(l) => {
            let err = (l - ORACLE_LOG10).abs();
            Ok((err <= TOL, (err - TOL).max(0.0)))
        }
        None => Ok((false, f64::INFINITY)),
    }
}

fn expect_t0_small_oracle(
    _scenario: &Scenario,
    _trajectory: &Trajectory,
    report: &RegimeReport,
) -> Result<(bool, f64)> {
    // High-precision evaluation of the hand-over bound for this
    // configuration.
    const ORACLE_T0: f64 = 27890.570079166639;
    const REL_TOL: f64 = 1e-9;
    match report.t0 {
        Some(T0Value::Finite(v)) => {
            let rel = (v - ORACLE_T0).abs() / ORACLE_T0;
            Ok((rel <= REL_TOL, (rel - REL_TOL).max(0.0)))
        }
        _ => Ok((false, f64::INFINITY)),
    }
}

fn expect_hand_over_check(
    _scenario: &Scenario,
    _trajectory: &Trajectory,
    report: &RegimeReport,
) -> Result<(bool, f64)> {
    let check = report
        .checks
        .iter()
        .find(|c| c.name == "acc_exceeds_runner_up_after_t0")
        .ok_or_else(|| {
            RunnerError::Validation(
                "the verifier did not evaluate accuracy at the hand-over time".into(),
            )
        })?;
    Ok((check.pass, check.worst_violation))
}

/// How much longer the entangled start takes to close the same relative
/// share of its accuracy gap than the direct-reference case does.
///
/// The entangled run is timed to its runner-up rate `p'`; the direct run
/// is timed to the target at the same relative position
/// `lambda = (p' - acc0) / (p* - acc0)` of its own gap.
fn expect_entanglement_ratio(
    scenario: &Scenario,
    trajectory: &Trajectory,
    _report: &RegimeReport,
) -> Result<(bool, f64)> {
    const MIN_RATIO: f64 = 10.0;
    let succ = scenario.task.succ();
    let star = scenario.task.r_star()?;
    let p_star = succ[star];
    let p_prime = succ
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != star)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let first = trajectory
        .samples
        .first()
        .ok_or_else(|| RunnerError::Validation("trajectory has no samples".into()))?;
    let lambda = (p_prime - first.acc) / (p_star - first.acc);

    let t_entangled = first_crossing(trajectory, CrossingKind::AccAbove, p_prime)?
        .ok_or_else(|| {
            RunnerError::Validation("the entangled run never crossed the runner-up rate".into())
        })?;

    let direct = direct_reference_case();
    let direct_traj = integrate(&direct.scenario)?;
    let direct_first = direct_traj
        .samples
        .first()
        .ok_or_else(|| RunnerError::Validation("direct run has no samples".into()))?;
    let target = direct_first.acc + lambda * (p_star - direct_first.acc);
    let t_direct = first_crossing(&direct_traj, CrossingKind::AccAbove, target)?
        .ok_or_else(|| {
            RunnerError::Validation("the direct run never crossed its matched target".into())
        })?;

    let ratio = t_entangled / t_direct;
    Ok((ratio >= MIN_RATIO, (MIN_RATIO - ratio).max(0.0)))
}

/// The integrated trajectory and the full verdict for one case study.
#[derive(Debug)]
pub struct CaseOutcome {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub report: RegimeReport,
}

/// Runs one registered case study end to end: integrate, verify, probe
/// the expectations, and write `trajectory.csv`, `summary.json`, and
/// `scenario.json` under `out_dir`.
///
/// The returned report carries the verifier's checks plus one
/// `expectation:`-prefixed check per registered expectation; the caller
/// decides what a failing check means.
pub fn run_case_study(name: &str, out_dir: &Path) -> Result<CaseOutcome> {
    let case = registry()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| {
            RunnerError::NotFound(format!(
                "no case study named {name:?}; available: {}",
                case_names().join(", ")
            ))
        })?;

    let trajectory = integrate(&case.scenario)?;
    let mut report = verify_trajectory(&case.scenario, &trajectory, CASE_EPSILON)?;
    for (label, probe) in &case.expectations {
        let (pass, worst_violation) = probe(&case.scenario, &trajectory, &report)?;
        report.checks.push(rlvrsim_core::Check {
            name: format!("expectation:{label}"),
            pass,
            worst_violation,
        });
    }

    std::fs::create_dir_all(out_dir).map_err(|e| RunnerError::io(out_dir.to_path_buf(), e))?;
    emit_csv(
        &trajectory.samples,
        trajectory.k,
        &out_dir.join("trajectory.csv"),
    )?;
    let summary = serde_json::to_string_pretty(&ReportDoc::from_report(&report))
        .map_err(|e| RunnerError::Parse(e.to_string()))?;
    write_atomic(&out_dir.join("summary.json"), &(summary + "\n"))?;
    write_atomic(
        &out_dir.join("scenario.json"),
        &serialize_scenario(&case.scenario),
    )?;

    Ok(CaseOutcome {
        scenario: case.scenario,
        trajectory,
        report,
    })
}
