//! Agent-based simulation of adversarial samples spreading through a
//! population of retrieval-augmented chat agents, and of cure samples
//! distributed by a few defending agents.
//!
//! Each round the population splits into questioners and responders. A
//! questioner retrieves a sample from its album and sends it with a question;
//! the responder stores the sample and answers. A virus sample makes the
//! questioner ask the malicious question and the responder comply, and keeps
//! being retrieved while the malicious exchange stays in the chat history.
//! Cowpox agents inspect their own answers and replace detected viruses with
//! cure samples that outrank them under the malicious context.
//!
//! [`meanfield`] holds the compartmental approximation of the same process.

pub mod attack;
pub mod defense;
pub mod domain;
pub mod engine;
pub mod error;
pub mod meanfield;
pub mod metrics;
pub mod replicates;
pub mod rng;
pub mod scoring;

pub use engine::{run, EngineConfig, PairEvent, RunOutput, SimState};
pub use error::{Result, SimError};
pub use metrics::{classify, CompartmentLabel, MetricsRow};
pub use replicates::{run_replicates, Execution};
