//! Serializable views of verification reports and bound summaries.

use serde::Serialize;

use rlvrsim_core::{
    accuracy, bound_t0, bound_t1, bound_t1_sft, classify_regime, gamma_ref, Check, Error, Mode,
    Regime, RegimeClass, RegimeReport, Scenario, T0Value,
};

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct CheckDoc {
    pub name: String,
    pub pass: bool,
    pub worst_violation: f64,
}

impl From<&Check> for CheckDoc {
    fn from(c: &Check) -> Self {
        CheckDoc {
            name: c.name.clone(),
            pass: c.pass,
            worst_violation: c.worst_violation,
        }
    }
}

/// The bounds a configuration admits, independent of any trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsDoc {
    pub regime: String,
    pub boundary_equality: bool,
    pub acc_ref: f64,
    pub gamma: Option<f64>,
    pub t0_log10: Option<f64>,
    /// Raw hand-over bound; absent when it overflows the float range.
    pub t0: Option<f64>,
    pub t0_overflow: bool,
    pub t1: Option<f64>,
    pub t1_already_satisfied: Option<bool>,
    pub t1_sft: Option<f64>,
    pub epsilon: f64,
}

/// A full verification report: the bounds plus per-invariant verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDoc {
    #[serde(flatten)]
    pub bounds: BoundsDoc,
    pub all_pass: bool,
    pub checks: Vec<CheckDoc>,
}

fn unpack_t0(value: Option<T0Value>) -> (Option<f64>, bool) {
    match value {
        Some(T0Value::Finite(v)) => (Some(v), false),
        Some(T0Value::Overflow) => (None, true),
        None => (None, false),
    }
}

impl ReportDoc {
    pub fn from_report(report: &RegimeReport) -> Self {
        let (t0, t0_overflow) = unpack_t0(report.t0);
        ReportDoc {
            bounds: BoundsDoc {
                regime: report.regime.regime.as_str().to_string(),
                boundary_equality: report.regime.boundary_equality,
                acc_ref: report.acc_ref,
                gamma: report.gamma,
                t0_log10: report.t0_log10,
                t0,
                t0_overflow,
                t1: report.t1.map(|b| b.time),
                t1_already_satisfied: report.t1.map(|b| b.already_satisfied),
                t1_sft: report.t1_sft,
                epsilon: report.epsilon,
            },
            all_pass: report.all_pass(),
            checks: report.checks.iter().map(CheckDoc::from).collect(),
        }
    }
}

/// Computes every bound the scenario's configuration admits at tolerance
/// `epsilon`, without integrating anything.
pub fn compute_bounds(scenario: &Scenario, epsilon: f64) -> Result<BoundsDoc> {
    let task = &scenario.task;
    let ref_probs = scenario.ref_state.probs();
    let acc_ref = accuracy(task, ref_probs)?;
    let class = match classify_regime(task, ref_probs) {
        Ok(c) => c,
        Err(Error::IllPosedTask(_)) => RegimeClass {
            regime: Regime::Neither,
            boundary_equality: false,
        },
        Err(e) => return Err(e.into()),
    };

    let mut gamma = None;
    let mut t0 = None;
    let mut t0_log10 = None;
    let mut t1 = None;
    if class.regime == Regime::Regime2 {
        gamma = Some(gamma_ref(task, ref_probs)?);
        match bound_t0(task, ref_probs) {
            Ok(b) => {
                t0_log10 = Some(b.log10);
                t0 = Some(b.value);
            }
            Err(Error::DegenerateBound(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if class.regime == Regime::Regime1 {
        t1 = Some(bound_t1(task, ref_probs, epsilon)?);
    }
    let t1_sft = match (&scenario.mode, &scenario.p_sft) {
        (Mode::SftFlow, Some(p)) => Some(bound_t1_sft(p, &scenario.ref_state, epsilon)?),
        _ => None,
    };

    let (t0_raw, t0_overflow) = unpack_t0(t0);
    Ok(BoundsDoc {
        regime: class.regime.as_str().to_string(),
        boundary_equality: class.boundary_equality,
        acc_ref,
        gamma,
        t0_log10,
        t0: t0_raw,
        t0_overflow,
        t1: t1.map(|b| b.time),
        t1_already_satisfied: t1.map(|b| b.already_satisfied),
        t1_sft,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rlvrsim_core::{PatternTask, PolicyState};

    #[test]
    fn entangled_configuration_reports_gamma_and_t0_only() {
        let task = PatternTask::from_rates(&[0.9, 0.6, 0.1]).unwrap();
        let reference = PolicyState::from_probs(&[0.05, 0.70, 0.25]).unwrap();
        let scenario = Scenario::rlvr(task, reference, 0.0).unwrap();
        let bounds = compute_bounds(&scenario, 0.05).unwrap();
        assert_eq!(bounds.regime, "regime2");
        assert_eq!(bounds.gamma, Some(6.0));
        assert!(bounds.t0.is_some());
        assert!(!bounds.t0_overflow);
        assert!(bounds.t1.is_none());
        assert!(bounds.t1_sft.is_none());
    }

    #[test]
    fn direct_configuration_reports_the_concentration_bound_only() {
        let task = PatternTask::from_rates(&[0.9, 0.6, 0.1]).unwrap();
        let reference = PolicyState::from_probs(&[0.5, 0.3, 0.2]).unwrap();
        let scenario = Scenario::rlvr(task, reference, 0.0).unwrap();
        let bounds = compute_bounds(&scenario, 0.05).unwrap();
        assert_eq!(bounds.regime, "regime1");
        assert!(bounds.gamma.is_none());
        assert!(bounds.t0.is_none() && bounds.t0_log10.is_none());
        assert!(bounds.t1.is_some());
    }

    #[test]
    fn bounds_serialize_to_flat_json() {
        let task = PatternTask::from_rates(&[0.9, 0.6, 0.1]).unwrap();
        let reference = PolicyState::from_probs(&[0.5, 0.3, 0.2]).unwrap();
        let scenario = Scenario::rlvr(task, reference, 0.0).unwrap();
        let bounds = compute_bounds(&scenario, 0.05).unwrap();
        let json = serde_json::to_value(&bounds).unwrap();
        assert_eq!(json["regime"], "regime1");
        assert!(json["gamma"].is_null());
        assert!(json["t1"].is_number());
    }
}
