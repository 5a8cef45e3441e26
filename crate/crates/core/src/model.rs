//! Core data model: pattern tasks, softmax policies, scenarios, and
//! regime classification.
//!
//! A *task* is a finite set of reasoning patterns, each with a success
//! probability. A *policy* is a categorical distribution over those
//! patterns, always stored in gauge-fixed logit form (mean-centred) next
//! to its cached softmax probabilities. A *scenario* bundles a task, a
//! reference policy, and the dynamics configuration (mode, horizon, step
//! control, seed) into the unit every other module consumes; its content
//! digest ties emitted trajectories back to the inputs that produced
//! them.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on `sum(probs) - 1` accepted by distribution-taking operations.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// One reasoning pattern: a label plus the probability that executing the
/// pattern yields a verifiably correct answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    /// Human-readable label, unique within a task.
    pub name: String,
    /// Probability of success in `[0, 1]`.
    pub p_succ: f64,
}

/// A finite menu of patterns with their success probabilities.
///
/// Ties in `p_succ` are representable (several operations are defined for
/// them), but operations that need *the* best or *the* runner-up pattern
/// return [`Error::IllPosedTask`] when the relevant maximum is tied.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTask {
    patterns: Vec<Pattern>,
    succ: Vec<f64>,
}

impl PatternTask {
    /// Builds a task from named patterns.
    ///
    /// Requires at least two patterns and success probabilities in
    /// `[0, 1]`; duplicate names are rejected.
    pub fn new(patterns: Vec<Pattern>) -> Result<Self> {
        if patterns.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a task needs at least 2 patterns, got {}",
                patterns.len()
            )));
        }
        for (i, p) in patterns.iter().enumerate() {
            if !p.p_succ.is_finite() || !(0.0..=1.0).contains(&p.p_succ) {
                return Err(Error::InvalidInput(format!(
                    "pattern {} ({:?}) has success probability {} outside [0, 1]",
                    i, p.name, p.p_succ
                )));
            }
            if patterns[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidInput(format!(
                    "duplicate pattern name {:?}",
                    p.name
                )));
            }
        }
        let succ = patterns.iter().map(|p| p.p_succ).collect();
        Ok(Self { patterns, succ })
    }

    /// Convenience constructor that auto-names patterns `r1..rK`.
    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        let patterns = rates
            .iter()
            .enumerate()
            .map(|(i, &p_succ)| Pattern {
                name: format!("r{}", i + 1),
                p_succ,
            })
            .collect();
        Self::new(patterns)
    }

    /// Number of patterns `K`.
    pub fn k(&self) -> usize {
        self.succ.len()
    }

    /// Success probabilities in pattern order.
    pub fn succ(&self) -> &[f64] {
        &self.succ
    }

    /// The patterns themselves.
    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Index of the unique best pattern.
    ///
    /// Errors with [`Error::IllPosedTask`] when the maximum success
    /// probability is attained by more than one pattern.
    pub fn r_star(&self) -> Result<usize> {
        let (idx, &best) = self
            .succ
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("task has at least two patterns");
        if self.succ.iter().filter(|&&p| p == best).count() > 1 {
            return Err(Error::IllPosedTask(format!(
                "top success probability {} is tied; no unique best pattern",
                best
            )));
        }
        Ok(idx)
    }

    /// Index of the unique second-best pattern (the runner-up).
    ///
    /// Errors when the best pattern is tied, or when the second-highest
    /// success probability is itself attained by more than one pattern.
    pub fn r_prime(&self) -> Result<usize> {
        let star = self.r_star()?;
        let (idx, &second) = self
            .succ
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != star)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("task has at least two patterns");
        if self
            .succ
            .iter()
            .enumerate()
            .filter(|&(i, &p)| i != star && p == second)
            .count()
            > 1
        {
            return Err(Error::IllPosedTask(format!(
                "second-best success probability {} is tied; no unique runner-up",
                second
            )));
        }
        Ok(idx)
    }

    /// Success probability of the unique best pattern.
    pub fn p_star(&self) -> Result<f64> {
        Ok(self.succ[self.r_star()?])
    }
}

/// Numerically stable softmax.
///
/// Subtracts the max logit before exponentiating, so any finite input is
/// safe; the output sums to 1 up to rounding and every entry is strictly
/// positive.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty vector".into()));
    }
    if let Some(bad) = logits.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite logit {} in softmax input",
            bad
        )));
    }
    Ok(softmax_unchecked(logits))
}

/// Softmax without the finiteness checks, for inner integrator loops that
/// have already validated their state.
pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Inverse of [`softmax`] in the mean-centred gauge.
///
/// Maps a strictly positive probability vector to the unique logit vector
/// with zero mean such that `softmax(logits)` reproduces the input (up to
/// rounding). Any zero entry is rejected: it has no finite logit.
pub fn logits_from_probs(probs: &[f64]) -> Result<Vec<f64>> {
    validate_distribution(probs, "probability vector")?;
    if let Some((i, &p)) = probs.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "probability {} at index {} has no finite logit; entries must be strictly positive",
            p, i
        )));
    }
    let logs: Vec<f64> = probs.iter().map(|&p| p.ln()).collect();
    Ok(center(&logs))
}

/// Subtracts the mean, pinning the translation gauge of a logit vector.
pub(crate) fn center(logits: &[f64]) -> Vec<f64> {
    let mean = logits.iter().sum::<f64>() / logits.len() as f64;
    logits.iter().map(|&x| x - mean).collect()
}

/// Expected verified reward of a policy on a task: `sum_i p_succ(i) * probs(i)`.
pub fn accuracy(task: &PatternTask, probs: &[f64]) -> Result<f64> {
    if probs.len() != task.k() {
        return Err(Error::InvalidInput(format!(
            "probability vector has length {}, task has {} patterns",
            probs.len(),
            task.k()
        )));
    }
    validate_distribution(probs, "probability vector")?;
    Ok(dot(task.succ(), probs))
}

/// Checks that `probs` is finite, entry-wise in `[0, 1]`, and sums to 1
/// within [`PROB_SUM_TOL`]. Zero entries are allowed here; callers that
/// need strict positivity check separately.
pub(crate) fn validate_distribution(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "{what} entry {i} is {p}, outside [0, 1]"
            )));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidInput(format!(
            "{what} sums to {sum}, more than {PROB_SUM_TOL} away from 1"
        )));
    }
    Ok(())
}

/// Like [`validate_distribution`] but additionally rejects zero entries.
pub(crate) fn validate_positive_distribution(probs: &[f64], what: &str) -> Result<()> {
    validate_distribution(probs, what)?;
    if let Some((i, &p)) = probs.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "{what} entry {i} is {p}; entries must be strictly positive"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A softmax policy: mean-centred logits plus their cached probabilities.
///
/// The two representations agree up to rounding by construction; code
/// may use whichever is convenient. Building from logits makes `probs`
/// exactly `softmax(logits)`; building from probabilities keeps the
/// given vector bit-for-bit so that quantities derived from it (odds
/// ratios, bounds) see the stated values, not a log/exp round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl PolicyState {
    /// Builds a state from logits (any finite values; they are re-centred).
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a policy needs at least 2 logits, got {}",
                logits.len()
            )));
        }
        if let Some(bad) = logits.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite logit {}", bad)));
        }
        let logits = center(logits);
        let probs = softmax_unchecked(&logits);
        Ok(Self { logits, probs })
    }

    /// Builds a state from a strictly positive probability vector,
    /// which is stored exactly as given.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        let logits = logits_from_probs(probs)?;
        if probs.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a policy needs at least 2 patterns, got {}",
                probs.len()
            )));
        }
        Ok(Self {
            logits,
            probs: probs.to_vec(),
        })
    }

    /// The uniform policy over `k` patterns.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::from_logits(&vec![0.0; k])
    }

    /// Mean-centred logits.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// `softmax(logits)`, strictly positive and summing to 1 up to rounding.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of patterns.
    pub fn k(&self) -> usize {
        self.logits.len()
    }
}

/// Which dynamics a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Deterministic gradient flow on the verified-reward objective.
    RlvrFlow,
    /// Deterministic gradient flow on the supervised cross-entropy loss.
    SftFlow,
    /// Stochastic policy-gradient training with sampled episodes.
    Sampled,
}

impl Mode {
    /// Canonical lower-snake name, as used in scenario files.
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::RlvrFlow => "rlvr_flow",
            Mode::SftFlow => "sft_flow",
            Mode::Sampled => "sampled",
        }
    }

    /// Parses the canonical name back into a mode.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rlvr_flow" => Ok(Mode::RlvrFlow),
            "sft_flow" => Ok(Mode::SftFlow),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::InvalidInput(format!(
                "unknown mode {:?}; expected rlvr_flow, sft_flow, or sampled",
                other
            ))),
        }
    }
}

/// A fully specified experiment: task, reference policy, dynamics mode,
/// and integration/recording controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// The pattern menu being optimised over.
    pub task: PatternTask,
    /// Reference policy: the KL anchor for regularised flows and the
    /// initial state of every run.
    pub ref_state: PolicyState,
    /// KL regularisation strength, `>= 0`.
    pub beta: f64,
    /// Dynamics selector.
    pub mode: Mode,
    /// Supervision target for `sft_flow` mode, strictly positive.
    pub p_sft: Option<Vec<f64>>,
    /// Flow-time horizon, `> 0`.
    pub horizon: f64,
    /// Initial integrator step (adapted thereafter), `> 0`.
    pub step: f64,
    /// Record every `record_stride`-th accepted step, `>= 1`.
    pub record_stride: usize,
    /// Seed for stochastic runs.
    pub seed: u64,
}

impl Scenario {
    const DEFAULT_HORIZON: f64 = 100.0;
    const DEFAULT_STEP: f64 = 1e-2;
    const DEFAULT_STRIDE: usize = 10;

    /// Verified-reward flow scenario with default controls.
    pub fn rlvr(task: PatternTask, ref_state: PolicyState, beta: f64) -> Result<Self> {
        let s = Self {
            task,
            ref_state,
            beta,
            mode: Mode::RlvrFlow,
            p_sft: None,
            horizon: Self::DEFAULT_HORIZON,
            step: Self::DEFAULT_STEP,
            record_stride: Self::DEFAULT_STRIDE,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Supervised-flow scenario with default controls.
    pub fn sft(task: PatternTask, ref_state: PolicyState, p_sft: Vec<f64>) -> Result<Self> {
        let s = Self {
            task,
            ref_state,
            beta: 0.0,
            mode: Mode::SftFlow,
            p_sft: Some(p_sft),
            horizon: Self::DEFAULT_HORIZON,
            step: Self::DEFAULT_STEP,
            record_stride: Self::DEFAULT_STRIDE,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Stochastic-training scenario with default controls.
    pub fn sampled(task: PatternTask, ref_state: PolicyState, beta: f64, seed: u64) -> Result<Self> {
        let s = Self {
            task,
            ref_state,
            beta,
            mode: Mode::Sampled,
            p_sft: None,
            horizon: Self::DEFAULT_HORIZON,
            step: Self::DEFAULT_STEP,
            record_stride: Self::DEFAULT_STRIDE,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// Returns the scenario with a different horizon.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    /// Returns the scenario with a different initial step.
    pub fn with_step(mut self, step: f64) -> Result<Self> {
        self.step = step;
        self.validate()?;
        Ok(self)
    }

    /// Returns the scenario with a different recording stride.
    pub fn with_record_stride(mut self, record_stride: usize) -> Result<Self> {
        self.record_stride = record_stride;
        self.validate()?;
        Ok(self)
    }

    /// Returns the scenario with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.seed = seed;
        self.validate()?;
        Ok(self)
    }

    /// Checks all cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.ref_state.k() != self.task.k() {
            return Err(Error::InvalidInput(format!(
                "reference policy has {} entries, task has {} patterns",
                self.ref_state.k(),
                self.task.k()
            )));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::InvalidInput(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "horizon must be finite and > 0, got {}",
                self.horizon
            )));
        }
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "step must be finite and > 0, got {}",
                self.step
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidInput("record_stride must be >= 1".into()));
        }
        match (self.mode, &self.p_sft) {
            (Mode::SftFlow, Some(p)) => {
                if p.len() != self.task.k() {
                    return Err(Error::InvalidInput(format!(
                        "p_sft has {} entries, task has {} patterns",
                        p.len(),
                        self.task.k()
                    )));
                }
                validate_positive_distribution(p, "p_sft")?;
            }
            (Mode::SftFlow, None) => {
                return Err(Error::InvalidInput(
                    "sft_flow mode requires a p_sft target".into(),
                ));
            }
            (_, Some(_)) => {
                return Err(Error::InvalidInput(format!(
                    "p_sft is only meaningful in sft_flow mode, not {}",
                    self.mode.as_str()
                )));
            }
            (_, None) => {}
        }
        Ok(())
    }

    /// Hex SHA-256 over the scenario's canonical byte encoding.
    ///
    /// Every field that can influence a trajectory is hashed — floats by
    /// their exact bit patterns — so two scenarios share a digest exactly
    /// when they are behaviourally identical.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"scenario/v1\n");
        h.update(self.mode.as_str().as_bytes());
        h.update([b'\n']);
        h.update((self.task.k() as u64).to_le_bytes());
        for p in self.task.patterns() {
            h.update((p.name.len() as u64).to_le_bytes());
            h.update(p.name.as_bytes());
            h.update(p.p_succ.to_bits().to_le_bytes());
        }
        for &x in self.ref_state.probs() {
            h.update(x.to_bits().to_le_bytes());
        }
        h.update(self.beta.to_bits().to_le_bytes());
        h.update(self.horizon.to_bits().to_le_bytes());
        h.update(self.step.to_bits().to_le_bytes());
        h.update((self.record_stride as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        match &self.p_sft {
            None => h.update([0u8]),
            Some(p) => {
                h.update([1u8]);
                for &x in p {
                    h.update(x.to_bits().to_le_bytes());
                }
            }
        }
        hex_string(&h.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{:02x}", b));
    }
    s
}

/// Convergence-regime label for a (task, reference policy) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The reference accuracy already beats every sub-optimal pattern's
    /// success probability: the best pattern wins directly.
    Regime1,
    /// The runner-up beats the reference accuracy while every other
    /// sub-optimal pattern loses to it: mass detours through the
    /// runner-up before the best pattern takes over.
    Regime2,
    /// Neither set of strict inequalities holds.
    Neither,
}

impl Regime {
    /// Canonical lower-snake name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Regime1 => "regime1",
            Regime::Regime2 => "regime2",
            Regime::Neither => "neither",
        }
    }
}

/// A regime label plus a flag for exact ties with the defining boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeClass {
    /// The label decided by strict inequalities.
    pub regime: Regime,
    /// True when some sub-optimal pattern's success probability equals the
    /// reference accuracy exactly, i.e. the point sits on the boundary
    /// between regimes. Strictness means such points always classify as
    /// [`Regime::Neither`].
    pub boundary_equality: bool,
}

/// Classifies the convergence regime of a task at a reference policy.
///
/// With `acc0 = accuracy(task, ref_probs)`:
/// * regime 1 — `acc0 > p_succ(r)` for every sub-optimal pattern `r`;
/// * regime 2 — the unique runner-up `r'` has `p_succ(r') > acc0` and
///   every other sub-optimal pattern has `p_succ(r) < acc0`;
/// * neither — anything else. Exact equality with the boundary sets the
///   flag and classifies as neither.
///
/// Errors when the best pattern is tied (and, where a runner-up is
/// needed, when the second-best is tied).
pub fn classify_regime(task: &PatternTask, ref_probs: &[f64]) -> Result<RegimeClass> {
    let acc0 = accuracy(task, ref_probs)?;
    let star = task.r_star()?;
    let succ = task.succ();

    let boundary_equality = succ
        .iter()
        .enumerate()
        .any(|(i, &p)| i != star && p == acc0);

    let regime1 = succ
        .iter()
        .enumerate()
        .all(|(i, &p)| i == star || p < acc0);
    if regime1 {
        return Ok(RegimeClass {
            regime: Regime::Regime1,
            boundary_equality,
        });
    }

    let prime = task.r_prime()?;
    let regime2 = succ[prime] > acc0
        && succ
            .iter()
            .enumerate()
            .all(|(i, &p)| i == star || i == prime || p < acc0);
    let regime = if regime2 { Regime::Regime2 } else { Regime::Neither };
    Ok(RegimeClass {
        regime,
        boundary_equality,
    })
}
