//! Exact and sampled training dynamics for tabular verified-reward
//! reinforcement learning.
//!
//! The model is deliberately small: a task is a finite set of reasoning
//! patterns, each with a fixed probability of producing a verifiable
//! correct answer, and a policy is a softmax distribution over those
//! patterns. On that model the crate provides
//!
//! - the reward and supervised objectives with exact gradients and the
//!   closed-form optimum of the regularised objective ([`objectives`]),
//! - an adaptive integrator for the induced gradient flows, plus
//!   threshold-crossing queries on recorded trajectories ([`flow`]),
//! - convergence-time guarantees — the direct-regime concentration bound,
//!   the entangled-regime hand-over bound (reported in log10 because it
//!   can dwarf the float range), and the supervised budget — together
//!   with a verifier that replays trajectories against every invariant
//!   their regime promises ([`theory`]),
//! - a seeded, batched policy-gradient trainer whose finite-sample runs
//!   are recorded on the same clock as the flow ([`sampler`]).
//!
//! Trajectories carry a digest of the scenario that produced them, so
//! verification cannot silently mix runs and configurations.

pub mod error;
pub mod flow;
pub mod model;
pub mod objectives;
pub mod sampler;
pub mod theory;

pub use error::{Error, Result};
pub use flow::{
    acc_derivative, first_crossing, flow_rhs, integrate, CrossingKind, Trajectory,
    TrajectorySample,
};
pub use model::{
    accuracy, classify_regime, logits_from_probs, softmax, Mode, Pattern, PatternTask,
    PolicyState, Regime, RegimeClass, Scenario,
};
pub use objectives::{
    entropy, optimal_policy_beta_zero, optimal_policy_closed_form, rlvr_grad, rlvr_objective,
    sft_flow_direction, sft_loss, GradientVector,
};
pub use sampler::{reinforce_step, sample_episode, train_sampler, Baseline, SamplerConfig};
pub use theory::{
    bound_t0, bound_t1, bound_t1_sft, gamma_ref, verify_trajectory, Check, RegimeReport, T0Bound,
    T0Value, T1Bound,
};
