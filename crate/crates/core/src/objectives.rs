//! Objective functions and their exact gradients in centred-logit space.
//!
//! Two objectives drive every dynamic in this crate: the KL-regularised
//! verified-reward objective `phi = Acc(pi) - beta * KL(pi || pi_ref)`
//! (maximised) and the supervised cross-entropy `L = -sum p_sft ln pi`
//! (minimised). Both gradients are taken with respect to the logits in
//! the mean-centred gauge, so they always sum to zero; this module also
//! provides the closed-form maximiser of the regularised objective and
//! its sharp `beta -> 0` limit.

use crate::error::{Error, Result};
use crate::model::{
    dot, validate_distribution, validate_positive_distribution, PatternTask, PolicyState,
};

/// Gradient (or flow direction) with respect to mean-centred logits.
///
/// Entries live in the tangent space of the gauge, so they sum to zero up
/// to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    /// One entry per pattern.
    pub entries: Vec<f64>,
}

impl GradientVector {
    /// Number of patterns.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when there are no entries (never for vectors built by this crate).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest absolute entry.
    pub fn inf_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Shannon entropy `-sum p ln p`, with the `0 ln 0 = 0` convention.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    validate_distribution(probs, "probability vector")?;
    Ok(probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum())
}

/// `sum_i p_i ln(p_i / q_i)` over validated vectors; zero `p` entries
/// contribute nothing, `q` is assumed strictly positive.
pub(crate) fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Ascent direction of `-KL(pi || pi_ref)` in centred logits, unscaled:
/// entry `i` is `pi_i * (sum_j pi_j ln(pi_j/ref_j) - ln(pi_i/ref_i))`.
pub(crate) fn kl_ascent_direction(probs: &[f64], ref_probs: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = probs
        .iter()
        .zip(ref_probs)
        .map(|(&p, &r)| (p / r).ln())
        .collect();
    let mean_log = dot(probs, &logs);
    probs
        .iter()
        .zip(&logs)
        .map(|(&p, &l)| p * (mean_log - l))
        .collect()
}

fn check_same_k(state: &PolicyState, reference: &PolicyState, task: &PatternTask) -> Result<()> {
    if state.k() != task.k() || reference.k() != task.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: task K={}, state K={}, reference K={}",
            task.k(),
            state.k(),
            reference.k()
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidInput(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    Ok(())
}

/// KL-regularised verified-reward objective
/// `Acc(pi) - beta * KL(pi || pi_ref)`.
pub fn rlvr_objective(
    task: &PatternTask,
    state: &PolicyState,
    reference: &PolicyState,
    beta: f64,
) -> Result<f64> {
    check_same_k(state, reference, task)?;
    check_beta(beta)?;
    let acc = dot(task.succ(), state.probs());
    if beta == 0.0 {
        return Ok(acc);
    }
    Ok(acc - beta * kl_divergence(state.probs(), reference.probs()))
}

/// Exact gradient of [`rlvr_objective`] with respect to centred logits.
///
/// Entry `i` is `pi_i (p_i - Acc) + beta * pi_i (S - ln(pi_i / ref_i))`
/// with `S = sum_j pi_j ln(pi_j / ref_j)`.
pub fn rlvr_grad(
    task: &PatternTask,
    state: &PolicyState,
    reference: &PolicyState,
    beta: f64,
) -> Result<GradientVector> {
    check_same_k(state, reference, task)?;
    check_beta(beta)?;
    let probs = state.probs();
    let acc = dot(task.succ(), probs);
    let mut entries: Vec<f64> = task
        .succ()
        .iter()
        .zip(probs)
        .map(|(&p, &pi)| pi * (p - acc))
        .collect();
    if beta > 0.0 {
        let reg = kl_ascent_direction(probs, reference.probs());
        for (e, r) in entries.iter_mut().zip(&reg) {
            *e += beta * r;
        }
    }
    Ok(GradientVector { entries })
}

/// Supervised cross-entropy `-sum_r p_sft(r) ln pi(r)`.
pub fn sft_loss(p_sft: &[f64], state: &PolicyState) -> Result<f64> {
    validate_distribution(p_sft, "p_sft")?;
    if p_sft.len() != state.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: p_sft has {} entries, state K={}",
            p_sft.len(),
            state.k()
        )));
    }
    Ok(p_sft
        .iter()
        .zip(state.probs())
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &pi)| -p * pi.ln())
        .sum())
}

/// Descent flow direction of [`sft_loss`] in centred logits: entry `j` is
/// `p_sft(j) - pi(j)`, i.e. the negative loss gradient.
pub fn sft_flow_direction(p_sft: &[f64], state: &PolicyState) -> Result<GradientVector> {
    validate_distribution(p_sft, "p_sft")?;
    if p_sft.len() != state.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: p_sft has {} entries, state K={}",
            p_sft.len(),
            state.k()
        )));
    }
    let entries = p_sft
        .iter()
        .zip(state.probs())
        .map(|(&p, &pi)| p - pi)
        .collect();
    Ok(GradientVector { entries })
}

/// Closed-form maximiser of the regularised objective for `beta > 0`:
/// `pi_opt(r) ∝ exp(p_succ(r)/beta) * pi_ref(r)`.
///
/// Evaluated in log space with a max shift, so `p_succ/beta` up to about
/// `1e6` stays finite. `beta = 0` is rejected here; its sharp limit lives
/// in [`optimal_policy_beta_zero`].
pub fn optimal_policy_closed_form(
    task: &PatternTask,
    ref_probs: &[f64],
    beta: f64,
) -> Result<Vec<f64>> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "beta must be finite and > 0 (got {beta}); the beta = 0 limit has its own operation"
        )));
    }
    validate_positive_distribution(ref_probs, "ref_probs")?;
    if ref_probs.len() != task.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: ref_probs has {} entries, task K={}",
            ref_probs.len(),
            task.k()
        )));
    }
    let logw: Vec<f64> = task
        .succ()
        .iter()
        .zip(ref_probs)
        .map(|(&p, &r)| p / beta + r.ln())
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.iter().map(|&x| x / z).collect())
}

/// Sharp `beta -> 0` limit of the optimal policy: one-hot at the unique
/// best pattern.
pub fn optimal_policy_beta_zero(task: &PatternTask, ref_probs: &[f64]) -> Result<Vec<f64>> {
    validate_positive_distribution(ref_probs, "ref_probs")?;
    if ref_probs.len() != task.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: ref_probs has {} entries, task K={}",
            ref_probs.len(),
            task.k()
        )));
    }
    let star = task.r_star()?;
    let mut out = vec![0.0; task.k()];
    out[star] = 1.0;
    Ok(out)
}
