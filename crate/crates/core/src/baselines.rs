//! Single-agent pipelines: one call for ori, role and icl, three chained
//! calls for cot.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abc::extract_abc_blocks;
use crate::analysis::RangeTable;
use crate::llm::{ChatBackend, ChatMessage, ChatRequest, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::orchestrator::{AbortReason, CompositionResult, ConversationState, OrchestratorConfig, Stage};
use crate::prompts::{render_single_agent, IclExample, SingleAgentMethod, UserPrompt};

pub const DEFAULT_ICL_EXAMPLES: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Ori,
    Role,
    Cot,
    Icl,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [BaselineMethod::Ori, BaselineMethod::Role, BaselineMethod::Cot, BaselineMethod::Icl];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Ori => "ori",
            BaselineMethod::Role => "role",
            BaselineMethod::Cot => "cot",
            BaselineMethod::Icl => "icl",
        }
    }

    fn steps(self) -> &'static [SingleAgentMethod] {
        match self {
            BaselineMethod::Ori => &[SingleAgentMethod::Ori],
            BaselineMethod::Role => &[SingleAgentMethod::Role],
            BaselineMethod::Icl => &[SingleAgentMethod::Icl],
            BaselineMethod::Cot => &[SingleAgentMethod::CotStep1, SingleAgentMethod::CotStep2, SingleAgentMethod::CotStep3],
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown baseline {s:?} (expected ori, role, cot or icl)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    /// Examples taken from the front of the ICL store per request.
    pub icl_examples: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            icl_examples: DEFAULT_ICL_EXAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("icl needs at least one example")]
    MissingExamples,
}

/// Runs one baseline. The tag of every request and transcript entry is the
/// method name. A backend error ends the run as aborted with the partial
/// transcript.
pub fn run_baseline(
    method: BaselineMethod,
    prompt: &UserPrompt,
    backend: &dyn ChatBackend,
    examples: &[IclExample],
    config: &BaselineConfig,
    ranges: &RangeTable,
) -> Result<CompositionResult, BaselineError> {
    let examples = &examples[..examples.len().min(config.icl_examples)];
    if method == BaselineMethod::Icl && examples.is_empty() {
        return Err(BaselineError::MissingExamples);
    }
    let orchestrator_view = OrchestratorConfig {
        model: config.model.clone(),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        ..OrchestratorConfig::default()
    };
    let mut state = ConversationState::new(prompt, orchestrator_view);
    state.stage_trace.clear();
    let mut outputs: Vec<String> = Vec::new();
    for &step in method.steps() {
        let messages = render_single_agent(step, prompt, &outputs, examples)
            .expect("context and examples were checked above");
        let mut request = ChatRequest::new(config.model.clone(), messages).with_agent(method.as_str());
        request.temperature = config.temperature;
        request.max_tokens = config.max_tokens;
        state.backend_calls += 1;
        match backend.complete(&request) {
            Ok(resp) => {
                state.usage += resp.usage;
                state.round += 1;
                state
                    .transcript
                    .push(ChatMessage::assistant(resp.content.clone()).tagged(method.as_str()));
                outputs.push(resp.content);
            }
            Err(error) => {
                warn!("{method} step {:?} failed: {error}", step);
                state.abort = Some(AbortReason::Backend { error });
                state.stage = Stage::Aborted;
                state.stage_trace.push(Stage::Aborted);
                return Ok(CompositionResult::finish(state, None, prompt, ranges));
            }
        }
    }
    state.stage = Stage::Done;
    state.stage_trace.push(Stage::Done);
    let final_abc = outputs.last().and_then(|o| extract_abc_blocks(o).pop());
    Ok(CompositionResult::finish(state, final_abc, prompt, ranges))
}
