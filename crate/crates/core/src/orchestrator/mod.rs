//! The multi-agent conversation: a fixed stage graph walked one agent
//! message at a time, with a hard cap on rounds.

mod engine;
mod roles;
mod stage;

pub use engine::{
    advance, legal_speakers, next_speaker, run_composition, AbortReason, CompositionResult, ConfigError,
    ConversationState, OrchestratorConfig, SelectionPolicy, DEFAULT_MAX_REVIEW_CYCLES, DEFAULT_MAX_ROUNDS,
    MANAGER_TAG, MIN_ROUNDS,
};
pub use roles::AgentRole;
pub use stage::{Stage, EDGES};
