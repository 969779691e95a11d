use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::roles::AgentRole;
use super::stage::Stage;
use crate::abc::{extract_abc_blocks, parse_tune, Tune};
use crate::analysis::{validate, RangeTable, ValidationReport};
use crate::llm::{BackendError, ChatBackend, ChatMessage, ChatRequest, Usage, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::prompts::templates::{approval_instruction, APPROVAL_SENTINEL, MANAGER_PROMPT};
use crate::prompts::{render_agent_system_prompt, UserPrompt};

/// Fewest agent messages that reach the arrangement once.
pub const MIN_ROUNDS: u32 = 6;
pub const DEFAULT_MAX_ROUNDS: u32 = 12;
pub const DEFAULT_MAX_REVIEW_CYCLES: u32 = 1;
/// Speaker tag of group-manager calls under `llm_managed` selection.
pub const MANAGER_TAG: &str = "manager";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    Deterministic,
    LlmManaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    /// Cap on agent messages; the opening user message is not counted.
    pub max_rounds: u32,
    pub max_review_cycles: u32,
    pub selection_policy: SelectionPolicy,
    /// Let the reviewer end revisions early by replying `APPROVE`.
    pub early_approval: bool,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            max_rounds: DEFAULT_MAX_ROUNDS,
            max_review_cycles: DEFAULT_MAX_REVIEW_CYCLES,
            selection_policy: SelectionPolicy::Deterministic,
            early_approval: false,
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("max_rounds must be at least {MIN_ROUNDS}, got {0}")]
    TooFewRounds(u32),
    #[error("max_review_cycles must be at least 1")]
    NoReviewCycles,
    #[error("temperature {0} outside [0, 2]")]
    Temperature(String),
}

impl OrchestratorConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.max_rounds < MIN_ROUNDS {
            return Err(ConfigError::TooFewRounds(self.max_rounds));
        }
        if self.max_review_cycles == 0 {
            return Err(ConfigError::NoReviewCycles);
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature.to_string()));
        }
        Ok(())
    }

    fn request(&self, messages: Vec<ChatMessage>, agent: &str) -> ChatRequest {
        let mut r = ChatRequest::new(self.model.clone(), messages).with_agent(agent);
        r.temperature = self.temperature;
        r.max_tokens = self.max_tokens;
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbortReason {
    RoundCap { rounds: u32 },
    Backend { error: BackendError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationState {
    pub stage: Stage,
    /// Agent messages so far.
    pub round: u32,
    /// Opening user message followed by one entry per agent message.
    pub transcript: Vec<ChatMessage>,
    /// Latest ABC (musicians, arrangement) or text (leader, reviewer) per role.
    pub artifacts: BTreeMap<AgentRole, String>,
    pub review_cycles_completed: u32,
    pub config: OrchestratorConfig,
    /// Stages entered, starting with the first one.
    pub stage_trace: Vec<Stage>,
    pub usage: Usage,
    pub backend_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<AbortReason>,
}

impl ConversationState {
    pub fn new(prompt: &UserPrompt, config: OrchestratorConfig) -> Self {
        ConversationState {
            stage: Stage::Planning,
            round: 0,
            transcript: vec![ChatMessage::user(prompt.text.clone()).tagged(AgentRole::UserProxy.as_str())],
            artifacts: BTreeMap::new(),
            review_cycles_completed: 0,
            config,
            stage_trace: vec![Stage::Planning],
            usage: Usage::default(),
            backend_calls: 0,
            abort: None,
        }
    }

    /// Speaker tags of the agent messages, in order.
    pub fn speakers(&self) -> Vec<AgentRole> {
        self.transcript
            .iter()
            .filter_map(|m| m.speaker_tag.as_deref()?.parse().ok())
            .filter(|r| *r != AgentRole::UserProxy)
            .collect()
    }

    fn enter(&mut self, stage: Stage) {
        self.stage = stage;
        self.stage_trace.push(stage);
    }
}

/// The shared transcript as seen by `viewer`: its own messages as assistant
/// turns, everyone else's as user turns prefixed with the speaker.
fn visible_transcript(state: &ConversationState, viewer: Option<AgentRole>) -> Vec<ChatMessage> {
    state
        .transcript
        .iter()
        .map(|m| {
            let tag = m.speaker_tag.as_deref().unwrap_or("user");
            if viewer.is_some_and(|v| v.as_str() == tag) {
                ChatMessage::assistant(m.content.clone())
            } else if tag == AgentRole::UserProxy.as_str() {
                ChatMessage::user(m.content.clone())
            } else {
                ChatMessage::user(format!("[{tag}]\n{}", m.content))
            }
        })
        .collect()
}

/// Speakers the policy may pick in a stage.
pub fn legal_speakers(stage: Stage) -> Vec<AgentRole> {
    stage.speaker().into_iter().collect()
}

/// Chooses who speaks next. Under `llm_managed` the backend is asked (as
/// group manager); a failed call or an illegal answer falls back to the
/// fixed stage order.
///
/// Panics on a terminal state.
pub fn next_speaker(state: &mut ConversationState, backend: &dyn ChatBackend) -> AgentRole {
    let fixed = state.stage.speaker().expect("next_speaker on a terminal state");
    if state.config.selection_policy == SelectionPolicy::Deterministic {
        return fixed;
    }
    let legal = legal_speakers(state.stage);
    let names: Vec<&str> = legal.iter().map(|r| r.as_str()).collect();
    let mut messages = vec![ChatMessage::system(MANAGER_PROMPT.replace("{candidates}", &names.join(", ")))];
    messages.extend(visible_transcript(state, None));
    let request = state.config.request(messages, MANAGER_TAG);
    state.backend_calls += 1;
    match backend.complete(&request) {
        Ok(resp) => {
            state.usage += resp.usage;
            match resp.content.trim().trim_matches(|c: char| !c.is_alphanumeric() && c != '_').parse::<AgentRole>() {
                Ok(role) if legal.contains(&role) => role,
                _ => {
                    warn!("manager picked {:?}, not one of {names:?}; using {fixed}", resp.content.trim());
                    fixed
                }
            }
        }
        Err(e) => {
            warn!("manager call failed ({e}); using {fixed}");
            fixed
        }
    }
}

fn approved(content: &str) -> bool {
    content.lines().any(|l| l.trim().trim_end_matches('.') == APPROVAL_SENTINEL)
}

fn transition(state: &ConversationState, speaker: AgentRole, content: &str) -> Stage {
    match state.stage {
        Stage::Planning => Stage::ComposingMelody,
        Stage::ComposingMelody => Stage::ComposingHarmony,
        Stage::ComposingHarmony => Stage::ComposingInstrument,
        Stage::ComposingInstrument | Stage::RevisingInstrument => Stage::Reviewing,
        Stage::Reviewing => {
            let early = state.config.early_approval && speaker == AgentRole::Reviewer && approved(content);
            if early || state.review_cycles_completed >= state.config.max_review_cycles {
                Stage::Arranging
            } else {
                Stage::RevisingMelody
            }
        }
        Stage::RevisingMelody => Stage::RevisingHarmony,
        Stage::RevisingHarmony => Stage::RevisingInstrument,
        Stage::Arranging => Stage::Done,
        Stage::Done | Stage::Aborted => state.stage,
    }
}

/// One agent message: pick the speaker, call the backend once, record the
/// reply and move the stage on.
///
/// Panics if the state is terminal or the round cap is already reached.
pub fn advance(mut state: ConversationState, backend: &dyn ChatBackend) -> ConversationState {
    assert!(!state.stage.is_terminal(), "advance on terminal stage {}", state.stage);
    assert!(state.round < state.config.max_rounds, "advance past the round cap");
    let speaker = next_speaker(&mut state, backend);

    let mut system = render_agent_system_prompt(speaker).to_string();
    if speaker == AgentRole::Reviewer && state.config.early_approval {
        system.push('\n');
        system.push_str(&approval_instruction());
    }
    let mut messages = vec![ChatMessage::system(system)];
    messages.extend(visible_transcript(&state, Some(speaker)));
    let request = state.config.request(messages, speaker.as_str());

    state.backend_calls += 1;
    let response = match backend.complete(&request) {
        Ok(r) => r,
        Err(error) => {
            warn!("{speaker} call failed in {}: {error}", state.stage);
            state.abort = Some(AbortReason::Backend { error });
            state.enter(Stage::Aborted);
            return state;
        }
    };
    state.usage += response.usage;
    state.round += 1;
    info!("round {} {speaker}: {} chars", state.round, response.content.len());

    if speaker.writes_abc() {
        if let Some(abc) = extract_abc_blocks(&response.content).pop() {
            state.artifacts.insert(speaker, abc);
        }
    } else {
        state.artifacts.insert(speaker, response.content.clone());
    }
    let next = transition(&state, speaker, &response.content);
    state
        .transcript
        .push(ChatMessage::assistant(response.content).tagged(speaker.as_str()));
    if state.stage == Stage::RevisingInstrument && next == Stage::Reviewing {
        state.review_cycles_completed += 1;
    }
    state.enter(next);

    if !state.stage.is_terminal() && state.round >= state.config.max_rounds {
        if state.artifacts.contains_key(&AgentRole::Arrangement) {
            state.enter(Stage::Done);
        } else {
            state.abort = Some(AbortReason::RoundCap { rounds: state.round });
            state.enter(Stage::Aborted);
        }
    }
    state
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionResult {
    pub final_abc: Option<String>,
    pub final_tune: Option<Tune>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub state: ConversationState,
    pub validation: Option<ValidationReport>,
    pub usage: Usage,
}

impl CompositionResult {
    /// Parses and validates `final_abc` against the prompt's attributes.
    pub fn finish(state: ConversationState, final_abc: Option<String>, prompt: &UserPrompt, ranges: &RangeTable) -> Self {
        let (final_tune, parse_error) = match final_abc.as_deref().map(parse_tune) {
            Some(Ok(t)) => (Some(t), None),
            Some(Err(e)) => (None, Some(e.to_string())),
            None => (None, None),
        };
        let validation = final_tune
            .as_ref()
            .map(|t| validate(t, Some(&prompt.attributes), ranges));
        CompositionResult {
            final_abc,
            final_tune,
            parse_error,
            usage: state.usage,
            state,
            validation,
        }
    }

    pub fn parse_ok(&self) -> bool {
        self.final_tune.is_some()
    }
}

/// Runs the whole conversation for one prompt.
pub fn run_composition(
    prompt: &UserPrompt,
    config: OrchestratorConfig,
    backend: &dyn ChatBackend,
    ranges: &RangeTable,
) -> Result<CompositionResult, ConfigError> {
    config.check()?;
    let mut state = ConversationState::new(prompt, config);
    while !state.stage.is_terminal() {
        state = advance(state, backend);
    }
    let final_abc = state.artifacts.get(&AgentRole::Arrangement).cloned();
    Ok(CompositionResult::finish(state, final_abc, prompt, ranges))
}
