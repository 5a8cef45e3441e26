//! Convergence-time bound calculators and a trajectory verifier.
//!
//! The calculators turn a (task, reference distribution) pair into the
//! guarantees the dynamics admit: the direct-regime time `T1(eps)` to
//! concentrate on the best pattern, the entangled-regime hand-over time
//! `T0` (with its reference-mass ratio `gamma`, and always reported in
//! log10 because `T0` routinely exceeds the native float range), and the
//! supervised budget `T1'(eps)`. The verifier replays a recorded
//! trajectory against every invariant its regime promises and returns a
//! structured report of pass/fail verdicts with worst violations.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::model::{
    accuracy, classify_regime, validate_positive_distribution, Mode, PatternTask, Regime,
    RegimeClass, Scenario,
};
use crate::objectives::{entropy, sft_loss};

/// The hand-over bound `T0`, which can exceed the native float range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T0Value {
    /// Representable as a float.
    Finite(f64),
    /// Beyond the native range; only the log10 magnitude is meaningful.
    Overflow,
}

/// `T0` with its always-finite log10 magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T0Bound {
    /// `log10(T0)`, finite even when the raw value overflows.
    pub log10: f64,
    /// The raw value when representable.
    pub value: T0Value,
}

/// A `T1(eps)` guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1Bound {
    /// Flow time after which `1 - pi(r*) < eps` is guaranteed.
    pub time: f64,
    /// True when the guarantee already holds at `t = 0` (then `time` is 0).
    pub already_satisfied: bool,
}

/// One verified invariant: name, verdict, and how badly the worst sample
/// missed the claim (0 when the claim held everywhere).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Stable identifier of the invariant.
    pub name: String,
    /// Whether the invariant held within its slack.
    pub pass: bool,
    /// Largest violation observed, clamped at 0.
    pub worst_violation: f64,
}

impl Check {
    fn from_signed(name: &str, signed_worst: f64, slack: f64) -> Self {
        Check {
            name: name.to_string(),
            pass: signed_worst <= slack,
            worst_violation: signed_worst.max(0.0),
        }
    }
}

/// Everything the verifier knows about a run: classification at the
/// reference, the applicable bounds, and per-invariant verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    /// Regime of the (task, reference) pair.
    pub regime: RegimeClass,
    /// Accuracy of the reference distribution.
    pub acc_ref: f64,
    /// Reference-mass ratio, present in the entangled regime.
    pub gamma: Option<f64>,
    /// `log10(T0)`, present in the entangled regime.
    pub t0_log10: Option<f64>,
    /// Raw `T0`, present in the entangled regime.
    pub t0: Option<T0Value>,
    /// Direct-regime concentration bound for `epsilon`.
    pub t1: Option<T1Bound>,
    /// Supervised-flow budget for `epsilon`, present for supervised runs.
    pub t1_sft: Option<f64>,
    /// Tolerance the `t1`/`t1_sft` bounds were evaluated at.
    pub epsilon: f64,
    /// Per-invariant verdicts.
    pub checks: Vec<Check>,
}

impl RegimeReport {
    /// True when every check passed.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check_bound_inputs(task: &PatternTask, ref_probs: &[f64]) -> Result<()> {
    validate_positive_distribution(ref_probs, "ref_probs")?;
    if ref_probs.len() != task.k() {
        return Err(Error::InvalidInput(format!(
            "ref_probs has {} entries, task has {} patterns",
            ref_probs.len(),
            task.k()
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie strictly inside (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Reference-mass ratio of the entangled regime:
/// `sum over r != r' of ref(r) / ref(r*)`, summed term by term in pattern
/// order. Includes `r*` itself (ratio 1), so the result is always >= 1.
///
/// The term-by-term order is contractual: lumping the numerator first
/// changes the rounding (e.g. a ratio that is exactly 6 term-by-term
/// lands one ulp off when lumped).
pub fn gamma_ref(task: &PatternTask, ref_probs: &[f64]) -> Result<f64> {
    check_bound_inputs(task, ref_probs)?;
    let star = task.r_star()?;
    let prime = task.r_prime()?;
    let mut gamma = 0.0;
    for (i, &p) in ref_probs.iter().enumerate() {
        if i != prime {
            gamma += p / ref_probs[star];
        }
    }
    Ok(gamma)
}

/// Hand-over time bound for the entangled regime:
/// `T0 = (1/(2 - 2 ref(r'))) * ((C1 gamma)^(2 C2 gamma) - 1)` with
/// `C2 = 1/Delta`, `C1 = p_succ(r')/Delta`, `Delta = p_succ(r*) - p_succ(r')`.
///
/// The raw value frequently overflows f64 (the flagship configuration
/// gives about `10^43.4`), so the log10 magnitude is computed alongside
/// and is always finite.
pub fn bound_t0(task: &PatternTask, ref_probs: &[f64]) -> Result<T0Bound> {
    check_bound_inputs(task, ref_probs)?;
    let class = classify_regime(task, ref_probs)?;
    if class.regime != Regime::Regime2 {
        return Err(Error::WrongRegime(format!(
            "the hand-over bound applies only in the entangled regime; this configuration is {}",
            class.regime.as_str()
        )));
    }
    let star = task.r_star()?;
    let prime = task.r_prime()?;
    let succ = task.succ();
    let delta = succ[star] - succ[prime];
    let c1 = succ[prime] / delta;
    let c2 = 1.0 / delta;
    let gamma = gamma_ref(task, ref_probs)?;
    let base = c1 * gamma;
    if base <= 1.0 {
        // Unreachable from the entangled-regime precondition: acc_ref >=
        // p* ref(r*) + p' ref(r') together with acc_ref < p' forces
        // C1*gamma > p*/Delta > 1. Kept as a guard for rounding collapse
        // when p' is at the bottom of the float range.
        return Err(Error::DegenerateBound(format!(
            "C1*gamma = {base} <= 1 makes the hand-over bound vacuous"
        )));
    }
    let expo = 2.0 * c2 * gamma;
    let prefactor = 1.0 / (2.0 - 2.0 * ref_probs[prime]);
    let power = base.powf(expo);
    let t0 = prefactor * (power - 1.0);
    if t0.is_finite() {
        Ok(T0Bound {
            log10: t0.log10(),
            value: T0Value::Finite(t0),
        })
    } else {
        Ok(T0Bound {
            log10: prefactor.log10() + expo * base.log10(),
            value: T0Value::Overflow,
        })
    }
}

/// Direct-regime concentration bound: the time after which
/// `1 - pi(r*) < epsilon` is guaranteed, namely
/// `T1 = (1/C) (1/epsilon - 1/(1 - ref(r*)))` with
/// `C = Delta * ref(r*)^2`.
///
/// When `epsilon >= 1 - ref(r*)` the guarantee already holds at `t = 0`
/// and the bound is 0 with the `already_satisfied` flag set.
pub fn bound_t1(task: &PatternTask, ref_probs: &[f64], epsilon: f64) -> Result<T1Bound> {
    check_bound_inputs(task, ref_probs)?;
    check_epsilon(epsilon)?;
    let class = classify_regime(task, ref_probs)?;
    if class.regime != Regime::Regime1 {
        return Err(Error::WrongRegime(format!(
            "the concentration bound applies only in the direct regime; this configuration is {}",
            class.regime.as_str()
        )));
    }
    let star = task.r_star()?;
    let pi0 = ref_probs[star];
    if epsilon >= 1.0 - pi0 {
        return Ok(T1Bound {
            time: 0.0,
            already_satisfied: true,
        });
    }
    let runner_up = task
        .succ()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != star)
        .map(|(_, &p)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    let delta = task.succ()[star] - runner_up;
    let c = delta * pi0 * pi0;
    Ok(T1Bound {
        time: (1.0 / epsilon - 1.0 / (1.0 - pi0)) / c,
        already_satisfied: false,
    })
}

/// Supervised-flow budget: `(loss(0) - entropy(p_sft)) / epsilon^2`,
/// after which the sup-norm gap to the target is below `epsilon`.
///
/// Requires a strictly positive target: with zero entries the infimum is
/// approached only asymptotically and no finite budget exists.
pub fn bound_t1_sft(p_sft: &[f64], init: &crate::model::PolicyState, epsilon: f64) -> Result<f64> {
    validate_positive_distribution(p_sft, "p_sft")?;
    check_epsilon(epsilon)?;
    if p_sft.len() != init.k() {
        return Err(Error::InvalidInput(format!(
            "p_sft has {} entries, init has {}",
            p_sft.len(),
            init.k()
        )));
    }
    let gap = sft_loss(p_sft, init)? - entropy(p_sft)?;
    // The loss is bounded below by the entropy; tiny negative rounding
    // residue at the infimum is clamped away.
    Ok(gap.max(0.0) / (epsilon * epsilon))
}

struct SftSeries {
    loss: Vec<f64>,
    sup_gap: Vec<f64>,
}

fn sft_series(p_sft: &[f64], trajectory: &Trajectory) -> SftSeries {
    let mut loss = Vec::with_capacity(trajectory.samples.len());
    let mut sup_gap = Vec::with_capacity(trajectory.samples.len());
    for s in &trajectory.samples {
        loss.push(
            p_sft
                .iter()
                .zip(&s.probs)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &pi)| -p * pi.ln())
                .sum(),
        );
        sup_gap.push(
            p_sft
                .iter()
                .zip(&s.probs)
                .fold(0.0_f64, |m, (&p, &pi)| m.max((p - pi).abs())),
        );
    }
    SftSeries { loss, sup_gap }
}

/// Worst increase over consecutive values (for series that must be
/// non-increasing); negate the series for the non-decreasing direction.
fn worst_increase(values: &[f64]) -> f64 {
    values
        .windows(2)
        .fold(f64::NEG_INFINITY, |m, w| m.max(w[1] - w[0]))
        .max(f64::NEG_INFINITY)
}

fn monotone_check(name: &str, values: &[f64], non_decreasing: bool, slack: f64) -> Check {
    if values.len() < 2 {
        return Check {
            name: name.to_string(),
            pass: true,
            worst_violation: 0.0,
        };
    }
    let signed = if non_decreasing {
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        worst_increase(&negated)
    } else {
        worst_increase(values)
    };
    Check::from_signed(name, signed, slack)
}

/// The sample representing flow time `t`: the first recorded sample at or
/// after `t`, or the final sample when the flow converged earlier (a
/// converged trajectory is stationary past its end, so its last state is
/// the state at every later time). `None` when `t` lies beyond an
/// unconverged trajectory — the claim is then unobservable.
fn sample_for_time(trajectory: &Trajectory, t: f64) -> Option<&crate::flow::TrajectorySample> {
    trajectory
        .samples
        .iter()
        .find(|s| s.t >= t)
        .or_else(|| trajectory.converged.then(|| trajectory.last()))
}

/// Replays a recorded trajectory against every invariant its regime
/// promises and returns the structured verdicts together with the
/// applicable bounds at tolerance `epsilon`.
///
/// The trajectory must carry the digest of `scenario` (provenance
/// error otherwise). Tasks without a unique best pattern are classified
/// as neither regime and receive only the generic checks.
pub fn verify_trajectory(
    scenario: &Scenario,
    trajectory: &Trajectory,
    epsilon: f64,
) -> Result<RegimeReport> {
    scenario.validate()?;
    check_epsilon(epsilon)?;
    let expected = scenario.digest();
    if trajectory.scenario_digest != expected {
        return Err(Error::Provenance {
            expected,
            found: trajectory.scenario_digest.clone(),
        });
    }
    if trajectory.samples.is_empty() {
        return Err(Error::InvalidInput(
            "trajectory has no samples to verify".into(),
        ));
    }

    let task = &scenario.task;
    let ref_probs = scenario.ref_state.probs();
    let acc_ref = accuracy(task, ref_probs)?;
    // A tied best pattern admits no per-regime guarantees; the generic
    // checks still apply.
    let regime = match classify_regime(task, ref_probs) {
        Ok(c) => c,
        Err(Error::IllPosedTask(_)) => RegimeClass {
            regime: Regime::Neither,
            boundary_equality: false,
        },
        Err(e) => return Err(e),
    };

    let mut gamma = None;
    let mut t0_log10 = None;
    let mut t0 = None;
    let mut t1 = None;
    if regime.regime == Regime::Regime2 {
        gamma = Some(gamma_ref(task, ref_probs)?);
        match bound_t0(task, ref_probs) {
            Ok(b) => {
                t0_log10 = Some(b.log10);
                t0 = Some(b.value);
            }
            Err(Error::DegenerateBound(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if regime.regime == Regime::Regime1 {
        t1 = Some(bound_t1(task, ref_probs, epsilon)?);
    }
    let t1_sft = match (&scenario.mode, &scenario.p_sft) {
        (Mode::SftFlow, Some(p)) => Some(bound_t1_sft(p, &scenario.ref_state, epsilon)?),
        _ => None,
    };

    let mut checks = Vec::new();
    let samples = &trajectory.samples;

    // Stored-output consistency: these hold for every mode.
    {
        let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let strictly_increasing = times.windows(2).all(|w| w[1] > w[0]);
        let worst = times
            .windows(2)
            .fold(f64::NEG_INFINITY, |m, w| m.max(w[0] - w[1]))
            .max(0.0);
        checks.push(Check {
            name: "samples_time_increasing".to_string(),
            pass: strictly_increasing,
            worst_violation: if samples.len() < 2 { 0.0 } else { worst },
        });

        let worst_sum = samples
            .iter()
            .map(|s| (s.probs.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0_f64, f64::max);
        checks.push(Check::from_signed("probs_normalized", worst_sum, 1e-9));

        let worst_acc = samples
            .iter()
            .map(|s| {
                let direct: f64 = task.succ().iter().zip(&s.probs).map(|(a, b)| a * b).sum();
                (s.acc - direct).abs()
            })
            .fold(0.0_f64, f64::max);
        checks.push(Check::from_signed("acc_matches_probs", worst_acc, 1e-12));
    }

    let unregularised_reward_flow = trajectory.mode == Mode::RlvrFlow && scenario.beta == 0.0;

    if unregularised_reward_flow {
        let worst_dacc = samples
            .iter()
            .map(|s| {
                let closed = crate::flow::acc_derivative(task, &s.probs).unwrap_or(f64::NAN);
                (s.dacc - closed).abs()
            })
            .fold(0.0_f64, f64::max);
        checks.push(Check::from_signed(
            "dacc_matches_closed_form",
            worst_dacc,
            1e-12,
        ));

        let accs: Vec<f64> = samples.iter().map(|s| s.acc).collect();
        checks.push(monotone_check("acc_monotone", &accs, true, 1e-9));
    }

    if unregularised_reward_flow && regime.regime == Regime::Regime1 {
        let star = task.r_star()?;
        let pi_star: Vec<f64> = samples.iter().map(|s| s.probs[star]).collect();
        checks.push(monotone_check("pi_star_monotone", &pi_star, true, 1e-9));

        if let Some(b) = &t1 {
            if let Some(s) = sample_for_time(trajectory, b.time) {
                let signed = (1.0 - s.probs[star]) - epsilon;
                checks.push(Check::from_signed("pi_star_at_t1", signed, 1e-6));
            }
        }
    }

    if unregularised_reward_flow && regime.regime == Regime::Regime2 {
        let star = task.r_star()?;
        let prime = task.r_prime()?;
        let pi0_prime = ref_probs[prime];

        let signed_bound = samples
            .iter()
            .map(|s| {
                let cap = 1.0 - 1.0 / (2.0 * s.t + 1.0 / (1.0 - pi0_prime));
                s.probs[prime] - cap
            })
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::from_signed(
            "pi_rprime_upper_bound",
            signed_bound,
            1e-6,
        ));

        let others: Vec<usize> = (0..task.k()).filter(|&i| i != star && i != prime).collect();
        let mut signed_rho = f64::NEG_INFINITY;
        for w in samples.windows(2) {
            for &r in &others {
                let before = w[0].probs[r] / w[0].probs[star];
                let after = w[1].probs[r] / w[1].probs[star];
                signed_rho = signed_rho.max(after - before);
            }
        }
        if others.is_empty() || samples.len() < 2 {
            signed_rho = 0.0;
        }
        checks.push(Check::from_signed("rho_monotone", signed_rho, 1e-9));

        if let Some(T0Value::Finite(t0v)) = t0 {
            let runner_up = task.succ()[prime];
            let mut accs: Vec<f64> = samples
                .iter()
                .filter(|s| s.t >= t0v)
                .map(|s| s.acc)
                .collect();
            if accs.is_empty() && trajectory.converged {
                accs.push(trajectory.last().acc);
            }
            if !accs.is_empty() {
                let signed = accs
                    .iter()
                    .map(|a| runner_up - a)
                    .fold(f64::NEG_INFINITY, f64::max);
                checks.push(Check::from_signed(
                    "acc_exceeds_runner_up_after_t0",
                    signed,
                    1e-9,
                ));
            }
        }
    }

    if trajectory.mode == Mode::SftFlow {
        let p_sft = scenario.p_sft.as_deref().expect("validated sft scenario");
        let series = sft_series(p_sft, trajectory);
        checks.push(monotone_check("sft_loss_monotone", &series.loss, false, 1e-9));
        checks.push(monotone_check(
            "sft_supgap_monotone",
            &series.sup_gap,
            false,
            1e-9,
        ));
        if let Some(budget) = t1_sft {
            if let Some(s) = sample_for_time(trajectory, budget) {
                let gap = p_sft
                    .iter()
                    .zip(&s.probs)
                    .fold(0.0_f64, |m, (&p, &pi)| m.max((p - pi).abs()));
                checks.push(Check::from_signed("sft_supgap_at_t1", gap - epsilon, 0.0));
            }
        }
    }

    Ok(RegimeReport {
        regime,
        acc_ref,
        gamma,
        t0_log10,
        t0,
        t1,
        t1_sft,
        epsilon,
        checks,
    })
}
