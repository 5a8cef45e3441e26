//! Error taxonomy shared by every module in the crate.
//!
//! The variants map one-to-one onto the failure classes the operations
//! promise: bad arguments, tasks whose optimum/runner-up is ambiguous,
//! mode or regime mismatches, vacuous bounds, numerical blow-ups (which
//! carry the last valid state for post-mortems), and provenance
//! mismatches between a trajectory and the scenario claimed to have
//! produced it.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (dimension mismatch, value out
    /// of range, malformed distribution, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The task does not single out the pattern the operation needs
    /// (tied best or tied second-best success rate).
    #[error("ill-posed task: {0}")]
    IllPosedTask(String),

    /// The scenario's mode is not usable by this operation.
    #[error("wrong mode: {op} requires {required}, scenario mode is {actual}")]
    WrongMode {
        /// Operation that rejected the scenario.
        op: &'static str,
        /// Mode class the operation accepts.
        required: &'static str,
        /// Mode the scenario actually carries.
        actual: &'static str,
    },

    /// A bound calculator was called outside the regime its theorem covers.
    #[error("wrong regime: {0}")]
    WrongRegime(String),

    /// The bound exists but is vacuous for these inputs.
    #[error("degenerate bound: {0}")]
    DegenerateBound(String),

    /// The integrator produced a non-finite state or underflowed its step.
    #[error("integration diverged at t={t}: {reason}")]
    IntegrationDiverged {
        /// Flow time of the last accepted state.
        t: f64,
        /// What went wrong.
        reason: String,
        /// Probabilities of the last valid state.
        last_probs: Vec<f64>,
    },

    /// The stochastic trainer produced non-finite logits.
    #[error("training diverged at step {step}")]
    TrainingDiverged {
        /// Update step at which divergence was detected.
        step: usize,
        /// Probabilities of the last valid state.
        last_probs: Vec<f64>,
    },

    /// A trajectory was presented with a scenario it was not produced from.
    #[error("provenance mismatch: trajectory digest {found} does not match scenario digest {expected}")]
    Provenance {
        /// Digest of the scenario handed to the verifier.
        expected: String,
        /// Digest recorded on the trajectory.
        found: String,
    },
}
