pub mod abc;
pub mod analysis;
pub mod baselines;
pub mod eval;
pub mod llm;
pub mod orchestrator;
pub mod prompts;
pub mod ratio;
