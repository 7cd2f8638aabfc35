//! Discrete-event simulation of a quantum network node that teleports
//! error-corrected request qubits.
//!
//! Each stored request qubit is protected by the 3-qubit phase-flip
//! repetition code and undergoes a syndrome round every `tau` seconds. The
//! syndrome history of a qubit determines the conditional probability that
//! it still carries no logical error, which the Freshest Qubit First policy
//! uses both for service and for buffer pushout.
//!
//! Module map:
//!
//! - [`analytics`]: flip probabilities, syndrome-conditioned error
//!   likelihoods and teleportation fidelity.
//! - [`scheduling`]: OQF / YQF / FQF service and pushout decisions.
//! - [`sim`]: the seeded event loop and its run metrics.
//! - [`oracle`]: permutation-enumeration check of batch optimality and the
//!   pairwise interchange inequality.
//! - [`experiments`]: sweep runners, confidence intervals and CSV / JSON
//!   output used by the CLI.

pub mod analytics;
pub mod error;
pub mod event;
pub mod experiments;
pub mod oracle;
pub mod rng;
pub mod scheduling;
pub mod sim;
pub mod stats;

pub use analytics::{
    cond_error_given_minus, cond_error_given_plus, phase_flip_prob, sample_syndrome_round,
    success_prob, teleport_fidelity, CondErrorProbs, NoiseParams, Outcome, RoundSample,
    SyndromeHistory,
};
pub use error::{Error, Result};
pub use scheduling::{PolicyKind, QubitId, QubitRecord};
pub use sim::{run, BufferCap, Horizon, RunMetrics, Scenario, SimConfig};
