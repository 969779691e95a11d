//! Prompt sets, ICL examples, fixed prompt texts and self-instruct expansion.

mod expand;
mod render;
mod store;
pub mod templates;

pub use expand::{expand_prompts, self_instruct_message, Expansion, SEEDS_PER_REQUEST};
pub use render::{
    cot_step2_text, cot_step3_text, icl_system_text, render_single_agent, RenderError, SingleAgentMethod,
};
pub use store::{
    bundled_icl_examples, bundled_prompts, load_icl_examples, load_prompt_set, parse_icl_examples,
    parse_prompt_set, prompt_from_value, save_prompt_set, IclExample, PromptAttributes, PromptStoreError,
    UserPrompt,
};
pub use templates::render_agent_system_prompt;
