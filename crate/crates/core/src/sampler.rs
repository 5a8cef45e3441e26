//! Stochastic policy-gradient training: the finite-sample counterpart of
//! the exact gradient flow.
//!
//! Each step draws a batch of episodes (pattern from the current policy,
//! then a Bernoulli reward at that pattern's success rate), forms the
//! score-function estimate of the objective gradient — with the
//! regularisation term added exactly in closed form rather than estimated
//! — and takes one ascent step on the logits. Discrete step counts map to
//! flow time as `t = steps * learning_rate`, so at small learning rates
//! the recorded trajectories are directly comparable with the integrator's.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{acc_flow_rate, Trajectory, TrajectorySample};
use crate::model::{Mode, PatternTask, PolicyState, Scenario};
use crate::objectives::{kl_ascent_direction, rlvr_grad};

/// Variance-reduction baseline subtracted from episode rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    /// Raw rewards (the unbiasedness guarantees are stated for this).
    #[default]
    None,
    /// Subtract the batch's mean reward.
    BatchMean,
}

/// Hyper-parameters of a sampled training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Episodes per gradient estimate.
    pub batch_size: usize,
    /// Ascent step size on the logits.
    pub learning_rate: f64,
    /// Number of gradient steps.
    pub steps: usize,
    /// Regularisation strength toward the reference distribution.
    pub beta: f64,
    /// Reward baseline.
    pub baseline: Baseline,
    /// Stream selector, combined with the scenario seed so several
    /// configurations can fan out of one scenario independently.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            batch_size: 32,
            learning_rate: 0.01,
            steps: 1000,
            beta: 0.0,
            baseline: Baseline::None,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Checks the hyper-parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::InvalidInput(format!(
                "beta must be non-negative and finite, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// The seeded generator for a training run: the scenario seed picks the
/// key, the config seed picks an independent stream under that key.
fn training_stream(scenario_seed: u64, config_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
    rng.set_stream(config_seed);
    rng
}

/// Draws one episode: a pattern from the current policy, then a
/// `{0, 1}` reward from that pattern's success Bernoulli.
pub fn sample_episode(
    task: &PatternTask,
    state: &PolicyState,
    rng: &mut impl Rng,
) -> Result<(usize, u8)> {
    if state.k() != task.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: state K={}, task K={}",
            state.k(),
            task.k()
        )));
    }
    let probs = state.probs();
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut chosen = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            chosen = i;
            break;
        }
    }
    // rng.gen() lies in [0, 1), so a rate of 1 always rewards and a rate
    // of 0 never does.
    let reward = u8::from(rng.gen::<f64>() < task.succ()[chosen]);
    Ok((chosen, reward))
}

/// One batched ascent step on the logits.
///
/// The reward part is the score-function estimator: each episode
/// contributes `(reward - baseline)` times the log-policy gradient of its
/// chosen pattern. The regularisation part is added exactly. The updated
/// logits are re-centred.
pub fn reinforce_step(
    task: &PatternTask,
    state: &PolicyState,
    reference: &PolicyState,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<PolicyState> {
    config.validate()?;
    if reference.k() != task.k() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: reference K={}, task K={}",
            reference.k(),
            task.k()
        )));
    }
    let k = task.k();
    let probs = state.probs();

    let mut choices = Vec::with_capacity(config.batch_size);
    let mut reward_sum = 0.0;
    for _ in 0..config.batch_size {
        let (chosen, reward) = sample_episode(task, state, rng)?;
        choices.push((chosen, f64::from(reward)));
        reward_sum += f64::from(reward);
    }
    let baseline = match config.baseline {
        Baseline::None => 0.0,
        Baseline::BatchMean => reward_sum / config.batch_size as f64,
    };

    // Per-pattern advantage totals; the log-policy gradient of pattern j
    // is e_j - pi, so the batch estimate collapses to
    // (weight_i - wsum * pi_i) / B.
    let mut weight = vec![0.0; k];
    let mut wsum = 0.0;
    for &(chosen, reward) in &choices {
        let advantage = reward - baseline;
        weight[chosen] += advantage;
        wsum += advantage;
    }
    let b = config.batch_size as f64;
    let mut g: Vec<f64> = weight
        .iter()
        .zip(probs)
        .map(|(&w, &pi)| (w - wsum * pi) / b)
        .collect();
    if config.beta > 0.0 {
        let reg = kl_ascent_direction(probs, reference.probs());
        for (gi, ri) in g.iter_mut().zip(&reg) {
            *gi += config.beta * ri;
        }
    }

    let logits: Vec<f64> = state
        .logits()
        .iter()
        .zip(&g)
        .map(|(&th, &gi)| th + config.learning_rate * gi)
        .collect();
    PolicyState::from_logits(&logits)
}

/// Runs a full sampled training loop and records it as a trajectory on
/// the flow clock (`t = step * learning_rate`).
///
/// Samples are recorded at step 0, every `record_stride` steps, and at
/// the final step; the recorded velocity is the exact mean-field rate at
/// the sampled state, which makes the output directly comparable with
/// integrated trajectories. Identical (scenario, config) pairs reproduce
/// identical trajectories bit for bit.
pub fn train_sampler(scenario: &Scenario, config: &SamplerConfig) -> Result<Trajectory> {
    scenario.validate()?;
    config.validate()?;
    if scenario.mode != Mode::Sampled {
        return Err(Error::WrongMode {
            op: "train_sampler",
            required: Mode::Sampled.as_str(),
            actual: scenario.mode.as_str(),
        });
    }
    // The trajectory is stamped with the scenario's digest, which covers
    // beta; training with a different beta would misrepresent the run.
    if config.beta != scenario.beta {
        return Err(Error::InvalidInput(format!(
            "config beta {} disagrees with scenario beta {}",
            config.beta, scenario.beta
        )));
    }
    let task = &scenario.task;
    let reference = &scenario.ref_state;
    let mut rng = training_stream(scenario.seed, config.seed);
    let mut state = reference.clone();

    let mut samples = Vec::new();
    let record = |state: &PolicyState, t: f64, samples: &mut Vec<TrajectorySample>| {
        let g = rlvr_grad(task, state, reference, config.beta)
            .expect("state and reference were validated");
        let probs = state.probs().to_vec();
        let acc = crate::model::dot(task.succ(), &probs);
        let dacc = acc_flow_rate(task.succ(), &probs, &g.entries);
        samples.push(TrajectorySample {
            t,
            probs,
            acc,
            dacc,
        });
    };
    record(&state, 0.0, &mut samples);

    for step in 1..=config.steps {
        // Inputs were validated before the loop, so a failure here means
        // the logits left the finite range.
        state = match reinforce_step(task, &state, reference, config, &mut rng) {
            Ok(next) => next,
            Err(_) => {
                return Err(Error::TrainingDiverged {
                    step,
                    last_probs: state.probs().to_vec(),
                })
            }
        };
        if step % scenario.record_stride == 0 || step == config.steps {
            record(&state, step as f64 * config.learning_rate, &mut samples);
        }
    }

    Ok(Trajectory {
        samples,
        mode: Mode::Sampled,
        scenario_digest: scenario.digest(),
        k: task.k(),
        converged: false,
    })
}
