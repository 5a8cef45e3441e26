//! Scenario documents: a small JSON schema describing a task, a reference
//! distribution, and run controls, with strict validation on load.

use serde::{Deserialize, Serialize};

use rlvrsim_core::{Mode, Pattern, PatternTask, PolicyState, Scenario};

use crate::error::{Result, RunnerError};

/// Reference masses may be given slightly off normalisation (hand-written
/// decimals); sums within this distance of 1 are renormalised exactly.
const RENORM_TOL: f64 = 1e-3;
/// Below this distance the masses are used verbatim, keeping clean inputs
/// bit-stable across load/serialize round trips.
const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternDoc {
    name: String,
    p_succ: f64,
    pi_ref: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    patterns: Vec<PatternDoc>,
    beta: f64,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default = "default_horizon")]
    horizon: f64,
    #[serde(default = "default_step")]
    step: f64,
    #[serde(default = "default_stride")]
    record_stride: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_sft: Option<Vec<f64>>,
}

fn default_mode() -> String {
    Mode::RlvrFlow.as_str().to_string()
}
fn default_horizon() -> f64 {
    100.0
}
fn default_step() -> f64 {
    1e-2
}
fn default_stride() -> usize {
    10
}

/// Parses and validates a scenario document.
///
/// Reference masses summing within `[0.999, 1.001]` are renormalised
/// exactly; sums outside that window, non-positive masses, and tasks with
/// a tied top success rate are rejected.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    let doc: ScenarioDoc =
        serde_json::from_str(source).map_err(|e| RunnerError::Parse(e.to_string()))?;

    let mode = Mode::parse(&doc.mode)?;

    let patterns: Vec<Pattern> = doc
        .patterns
        .iter()
        .map(|p| Pattern {
            name: p.name.clone(),
            p_succ: p.p_succ,
        })
        .collect();
    let task = PatternTask::new(patterns)?;
    // A unique best pattern is part of the document contract, even though
    // the in-process model tolerates ties for tie-agnostic operations.
    task.r_star()?;

    let mut ref_probs: Vec<f64> = doc.patterns.iter().map(|p| p.pi_ref).collect();
    if let Some(bad) = ref_probs.iter().find(|&&p| !p.is_finite() || p <= 0.0) {
        return Err(RunnerError::Validation(format!(
            "pi_ref entries must be strictly positive and finite, got {bad}"
        )));
    }
    let sum: f64 = ref_probs.iter().sum();
    if (sum - 1.0).abs() > RENORM_TOL {
        return Err(RunnerError::Validation(format!(
            "pi_ref sums to {sum}, outside the renormalisable window [0.999, 1.001]"
        )));
    }
    if (sum - 1.0).abs() > EXACT_TOL {
        for p in &mut ref_probs {
            *p /= sum;
        }
    }
    let ref_state = PolicyState::from_probs(&ref_probs)?;

    if doc.p_sft.is_some() && mode != Mode::SftFlow {
        return Err(RunnerError::Validation(
            "p_sft is only meaningful in sft_flow mode".into(),
        ));
    }
    let scenario = match mode {
        Mode::RlvrFlow => Scenario::rlvr(task, ref_state, doc.beta)?,
        Mode::Sampled => Scenario::sampled(task, ref_state, doc.beta, doc.seed)?,
        Mode::SftFlow => {
            if doc.beta != 0.0 {
                return Err(RunnerError::Validation(format!(
                    "sft_flow takes no regularisation; set beta to 0 (got {})",
                    doc.beta
                )));
            }
            let p_sft = doc.p_sft.clone().ok_or_else(|| {
                RunnerError::Validation("sft_flow mode requires the p_sft field".into())
            })?;
            Scenario::sft(task, ref_state, p_sft)?
        }
    };
    Ok(scenario
        .with_horizon(doc.horizon)?
        .with_step(doc.step)?
        .with_record_stride(doc.record_stride)?
        .with_seed(doc.seed)?)
}

/// Renders a scenario back into the document format, all fields explicit.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let doc = ScenarioDoc {
        patterns: scenario
            .task
            .patterns()
            .iter()
            .zip(scenario.ref_state.probs())
            .map(|(p, &pi_ref)| PatternDoc {
                name: p.name.clone(),
                p_succ: p.p_succ,
                pi_ref,
            })
            .collect(),
        beta: scenario.beta,
        mode: scenario.mode.as_str().to_string(),
        horizon: scenario.horizon,
        step: scenario.step,
        record_stride: scenario.record_stride,
        seed: scenario.seed,
        p_sft: scenario.p_sft.clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    out.push('\n');
    out
}
