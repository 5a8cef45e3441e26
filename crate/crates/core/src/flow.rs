//! Gradient-flow dynamics: right-hand sides, adaptive integration,
//! trajectory recording, and event detection.
//!
//! Both flows evolve centred logits `theta` by `dtheta/dt = rhs(pi)` —
//! ascent on the verified-reward objective or descent on the supervised
//! cross-entropy — behind the common [`Dynamics`] trait, selected at run
//! time from the scenario's mode. Integration uses the classical
//! fourth-order one-step method with step-doubling error control:
//! working in logit space keeps the simplex constraint exact, and the
//! smoothness of both flows makes a non-stiff method sufficient.

use crate::error::{Error, Result};
use crate::model::{
    center, dot, softmax_unchecked, validate_distribution, Mode, PatternTask, PolicyState,
    Scenario,
};
use crate::objectives::{kl_ascent_direction, GradientVector};

/// Local error accepted per step (step-doubling estimate, sup norm).
const TOL_LOCAL: f64 = 1e-9;
/// Smallest controller step before integration gives up.
const STEP_FLOOR: f64 = 1e-8;
/// Early-stop threshold on the right-hand side's sup norm.
const CONVERGED_RHS: f64 = 1e-12;

/// A flow right-hand side in centred-logit space, evaluated at the
/// current probabilities.
pub trait Dynamics {
    /// Short name used in error messages.
    fn name(&self) -> &'static str;
    /// `dtheta/dt` at the given probability vector.
    fn rhs(&self, probs: &[f64]) -> Vec<f64>;
}

/// Ascent flow on `Acc(pi) - beta * KL(pi || pi_ref)`.
pub struct RlvrDynamics {
    succ: Vec<f64>,
    ref_probs: Vec<f64>,
    beta: f64,
}

impl RlvrDynamics {
    /// Builds the flow for a task, reference distribution, and strength.
    pub fn new(task: &PatternTask, ref_probs: &[f64], beta: f64) -> Self {
        Self {
            succ: task.succ().to_vec(),
            ref_probs: ref_probs.to_vec(),
            beta,
        }
    }
}

impl Dynamics for RlvrDynamics {
    fn name(&self) -> &'static str {
        "rlvr_flow"
    }

    fn rhs(&self, probs: &[f64]) -> Vec<f64> {
        let acc = dot(&self.succ, probs);
        let mut out: Vec<f64> = self
            .succ
            .iter()
            .zip(probs)
            .map(|(&p, &pi)| pi * (p - acc))
            .collect();
        if self.beta != 0.0 {
            let reg = kl_ascent_direction(probs, &self.ref_probs);
            for (o, r) in out.iter_mut().zip(&reg) {
                *o += self.beta * r;
            }
        }
        out
    }
}

/// Descent flow on the supervised cross-entropy towards `p_sft`.
pub struct SftDynamics {
    p_sft: Vec<f64>,
}

impl SftDynamics {
    /// Builds the flow towards a supervision target.
    pub fn new(p_sft: &[f64]) -> Self {
        Self {
            p_sft: p_sft.to_vec(),
        }
    }
}

impl Dynamics for SftDynamics {
    fn name(&self) -> &'static str {
        "sft_flow"
    }

    fn rhs(&self, probs: &[f64]) -> Vec<f64> {
        self.p_sft.iter().zip(probs).map(|(&p, &pi)| p - pi).collect()
    }
}

/// Builds the dynamics a deterministic scenario asks for; `None` when the
/// scenario is stochastic (callers turn that into their own mode error).
fn build_dynamics(scenario: &Scenario) -> Option<Box<dyn Dynamics>> {
    match scenario.mode {
        Mode::RlvrFlow => Some(Box::new(RlvrDynamics::new(
            &scenario.task,
            scenario.ref_state.probs(),
            scenario.beta,
        ))),
        Mode::SftFlow => Some(Box::new(SftDynamics::new(
            scenario.p_sft.as_deref().expect("validated sft scenario"),
        ))),
        Mode::Sampled => None,
    }
}

fn wrong_mode(op: &'static str) -> Error {
    Error::WrongMode {
        op,
        required: "rlvr_flow or sft_flow",
        actual: "sampled",
    }
}

/// Flow direction `dtheta/dt` for a deterministic scenario at a state.
pub fn flow_rhs(scenario: &Scenario, state: &PolicyState) -> Result<GradientVector> {
    scenario.validate()?;
    if state.k() != scenario.task.k() {
        return Err(Error::InvalidInput(format!(
            "state has {} entries, task has {} patterns",
            state.k(),
            scenario.task.k()
        )));
    }
    let dynamics = build_dynamics(scenario).ok_or_else(|| wrong_mode("flow_rhs"))?;
    Ok(GradientVector {
        entries: dynamics.rhs(state.probs()),
    })
}

/// One recorded point of a flow: time, distribution, accuracy, and the
/// instantaneous accuracy velocity along the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    /// Flow time.
    pub t: f64,
    /// Policy probabilities at `t`.
    pub probs: Vec<f64>,
    /// `accuracy(task, probs)`.
    pub acc: f64,
    /// `dAcc/dt` along the flow at `t`.
    pub dacc: f64,
}

/// A recorded run: ordered samples plus provenance and termination facts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Samples in strictly increasing `t`, starting at `t = 0`.
    pub samples: Vec<TrajectorySample>,
    /// Which dynamics produced the run.
    pub mode: Mode,
    /// Digest of the originating scenario, for provenance checks.
    pub scenario_digest: String,
    /// Number of patterns.
    pub k: usize,
    /// True when the run stopped early because the right-hand side's sup
    /// norm fell below `1e-12` (the flow has effectively reached a
    /// stationary point).
    pub converged: bool,
}

impl Trajectory {
    /// The last recorded sample.
    ///
    /// Every trajectory produced by this crate is non-empty.
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectories are non-empty")
    }

    /// Flow time of the last sample.
    pub fn final_time(&self) -> f64 {
        self.last().t
    }
}

/// Instantaneous `dAcc/dt` given the logit velocity `g`: the chain rule
/// through softmax gives `sum_i p_i pi_i (g_i - <pi, g>)`.
pub(crate) fn acc_flow_rate(succ: &[f64], probs: &[f64], g: &[f64]) -> f64 {
    let mean_g = dot(probs, g);
    succ.iter()
        .zip(probs)
        .zip(g)
        .map(|((&p, &pi), &gi)| p * pi * (gi - mean_g))
        .sum()
}

fn make_sample(succ: &[f64], dynamics: &dyn Dynamics, t: f64, probs: Vec<f64>) -> TrajectorySample {
    let acc = dot(succ, &probs);
    let g = dynamics.rhs(&probs);
    let dacc = acc_flow_rate(succ, &probs, &g);
    TrajectorySample {
        t,
        probs,
        acc,
        dacc,
    }
}

fn rk4_step(dynamics: &dyn Dynamics, logits: &[f64], h: f64) -> Vec<f64> {
    let k1 = dynamics.rhs(&softmax_unchecked(logits));
    let y2: Vec<f64> = logits
        .iter()
        .zip(&k1)
        .map(|(&y, &k)| y + 0.5 * h * k)
        .collect();
    let k2 = dynamics.rhs(&softmax_unchecked(&y2));
    let y3: Vec<f64> = logits
        .iter()
        .zip(&k2)
        .map(|(&y, &k)| y + 0.5 * h * k)
        .collect();
    let k3 = dynamics.rhs(&softmax_unchecked(&y3));
    let y4: Vec<f64> = logits.iter().zip(&k3).map(|(&y, &k)| y + h * k).collect();
    let k4 = dynamics.rhs(&softmax_unchecked(&y4));
    logits
        .iter()
        .zip(&k1)
        .zip(&k2)
        .zip(&k3)
        .zip(&k4)
        .map(|((((&y, &a), &b), &c), &d)| y + h / 6.0 * (a + 2.0 * b + 2.0 * c + d))
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates a deterministic scenario from `t = 0` to its horizon.
///
/// Samples are recorded every `record_stride` accepted steps plus both
/// endpoints. Steps are accepted when the step-doubling error estimate is
/// below `1e-9` (the two-half-step result is kept and re-centred),
/// rejected steps halve the step, and quiet steps double it; a step
/// falling below `1e-8` aborts with a divergence error. Integration stops
/// early with `converged = true` once the right-hand side's sup norm
/// drops below `1e-12`.
pub fn integrate(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let dynamics = build_dynamics(scenario).ok_or_else(|| wrong_mode("integrate"))?;
    let succ = scenario.task.succ();

    let mut logits = scenario.ref_state.logits().to_vec();
    let mut t = 0.0_f64;
    let mut h = scenario.step;
    let mut accepted: usize = 0;
    let mut converged = false;

    let mut samples = vec![make_sample(
        succ,
        dynamics.as_ref(),
        t,
        softmax_unchecked(&logits),
    )];

    if inf_norm(&dynamics.rhs(&samples[0].probs)) < CONVERGED_RHS {
        converged = true;
    } else {
        while t < scenario.horizon {
            let h_eff = h.min(scenario.horizon - t);
            if t + h_eff == t {
                // The remaining interval is below the resolution of t
                // itself; the endpoint is reached for all purposes.
                break;
            }
            let y_full = rk4_step(dynamics.as_ref(), &logits, h_eff);
            let y_mid = rk4_step(dynamics.as_ref(), &logits, 0.5 * h_eff);
            let y_half = rk4_step(dynamics.as_ref(), &y_mid, 0.5 * h_eff);
            let finite =
                y_full.iter().all(|x| x.is_finite()) && y_half.iter().all(|x| x.is_finite());
            let err = if finite {
                y_full
                    .iter()
                    .zip(&y_half)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            } else {
                f64::INFINITY
            };
            if err < TOL_LOCAL {
                logits = center(&y_half);
                t += h_eff;
                accepted += 1;
                let probs = softmax_unchecked(&logits);
                if accepted % scenario.record_stride == 0 {
                    samples.push(make_sample(succ, dynamics.as_ref(), t, probs.clone()));
                }
                if err < TOL_LOCAL / 64.0 {
                    h *= 2.0;
                }
                if inf_norm(&dynamics.rhs(&probs)) < CONVERGED_RHS {
                    converged = true;
                    break;
                }
            } else {
                h *= 0.5;
                if h < STEP_FLOOR {
                    let last = samples.last().expect("t=0 sample present");
                    return Err(Error::IntegrationDiverged {
                        t: last.t,
                        reason: format!(
                            "step size underflowed {STEP_FLOOR:e} with local error estimate {err:e}"
                        ),
                        last_probs: last.probs.clone(),
                    });
                }
            }
        }
        if samples.last().expect("t=0 sample present").t < t {
            samples.push(make_sample(
                succ,
                dynamics.as_ref(),
                t,
                softmax_unchecked(&logits),
            ));
        }
    }

    Ok(Trajectory {
        samples,
        mode: scenario.mode,
        scenario_digest: scenario.digest(),
        k: scenario.task.k(),
        converged,
    })
}

/// Instantaneous accuracy velocity of the unregularised reward flow:
/// `sum_i pi_i^2 (p_i - Acc)^2`, which is non-negative — accuracy never
/// decreases along that flow.
pub fn acc_derivative(task: &PatternTask, probs: &[f64]) -> Result<f64> {
    if probs.len() != task.k() {
        return Err(Error::InvalidInput(format!(
            "probability vector has length {}, task has {} patterns",
            probs.len(),
            task.k()
        )));
    }
    validate_distribution(probs, "probability vector")?;
    let acc = dot(task.succ(), probs);
    Ok(task
        .succ()
        .iter()
        .zip(probs)
        .map(|(&p, &pi)| {
            let d = pi * (p - acc);
            d * d
        })
        .sum())
}

/// Which quantity [`first_crossing`] watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// Accuracy rising above the threshold.
    AccAbove,
    /// A single pattern's probability rising above the threshold.
    PatternProbAbove(usize),
}

/// Earliest flow time at which the monitored quantity strictly exceeds
/// the threshold, linearly interpolated between the bracketing samples;
/// `None` if the trajectory never crosses.
pub fn first_crossing(
    trajectory: &Trajectory,
    kind: CrossingKind,
    threshold: f64,
) -> Result<Option<f64>> {
    if trajectory.samples.is_empty() {
        return Err(Error::InvalidInput("trajectory has no samples".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidInput(format!(
            "threshold must be finite, got {threshold}"
        )));
    }
    let value: Box<dyn Fn(&TrajectorySample) -> f64> = match kind {
        CrossingKind::AccAbove => Box::new(|s: &TrajectorySample| s.acc),
        CrossingKind::PatternProbAbove(i) => {
            if i >= trajectory.k {
                return Err(Error::InvalidInput(format!(
                    "pattern index {i} out of range for {} patterns",
                    trajectory.k
                )));
            }
            Box::new(move |s: &TrajectorySample| s.probs[i])
        }
    };
    let mut prev: Option<(f64, f64)> = None;
    for s in &trajectory.samples {
        let v = value(s);
        if v > threshold {
            return Ok(Some(match prev {
                None => s.t,
                Some((t0, v0)) => t0 + (threshold - v0) * (s.t - t0) / (v - v0),
            }));
        }
        prev = Some((s.t, v));
    }
    Ok(None)
}
