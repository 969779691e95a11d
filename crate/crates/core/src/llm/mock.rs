//! Scripted backend for offline runs and tests.
//!
//! A script maps keys to reply lists. Each call consumes the next reply of
//! the first key that exists, checked in this order: the request's agent
//! tag, the call's turn index (`"0"`, `"1"`, ...), then `"*"`. A key whose
//! list is used up fails with `script_exhausted` rather than falling through.
//!
//! ```json
//! {"leader": ["plan"], "melody": ["```\nX:1 ...```"], "3": [{"error": "timeout"}]}
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, BackendErrorKind, ChatBackend};
use super::types::{ChatRequest, ChatResponse, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Full {
        content: String,
        #[serde(default)]
        prompt_tokens: u64,
        #[serde(default)]
        completion_tokens: u64,
    },
    Error {
        error: BackendErrorKind,
        #[serde(default)]
        status: Option<u16>,
        #[serde(default)]
        detail: String,
    },
}

impl From<&str> for MockReply {
    fn from(s: &str) -> Self {
        MockReply::Text(s.to_string())
    }
}

pub type MockScript = BTreeMap<String, Vec<MockReply>>;

#[derive(Debug, Clone, PartialEq)]
pub struct MockCall {
    pub turn_index: usize,
    pub key: Option<String>,
    pub request: ChatRequest,
}

#[derive(Debug, Default)]
struct State {
    cursors: BTreeMap<String, usize>,
    calls: Vec<MockCall>,
}

#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    state: Mutex<State>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            state: Mutex::new(State::default()),
        }
    }

    /// Every call gets the next item of `replies`, whatever its tag.
    pub fn sequence<I, R>(replies: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<MockReply>,
    {
        let mut script = MockScript::new();
        script.insert("*".into(), replies.into_iter().map(Into::into).collect());
        MockBackend::new(script)
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let script: MockScript = serde_json::from_str(text)
            .map_err(|e| BackendError::new(BackendErrorKind::Config, format!("mock script: {e}")))?;
        if script.is_empty() {
            return Err(BackendError::new(BackendErrorKind::Config, "mock script is empty"));
        }
        Ok(MockBackend::new(script))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            BackendError::new(BackendErrorKind::Config, format!("{}: {e}", path.display()))
        })?;
        MockBackend::from_json(&text)
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.lock().calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.lock().calls.len()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn pick_key(&self, request: &ChatRequest, turn: usize) -> Option<String> {
        let turn = turn.to_string();
        request
            .agent
            .as_deref()
            .filter(|a| self.script.contains_key(*a))
            .map(str::to_string)
            .or_else(|| self.script.contains_key(&turn).then_some(turn))
            .or_else(|| self.script.contains_key("*").then(|| "*".to_string()))
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut state = self.lock();
        let turn = state.calls.len();
        let key = self.pick_key(request, turn);
        state.calls.push(MockCall {
            turn_index: turn,
            key: key.clone(),
            request: request.clone(),
        });
        let Some(key) = key else {
            return Err(BackendError::new(
                BackendErrorKind::ScriptExhausted,
                format!(
                    "no script entry for agent {:?} or turn {turn}",
                    request.agent.as_deref().unwrap_or("-")
                ),
            ));
        };
        let cursor = state.cursors.entry(key.clone()).or_insert(0);
        let reply = self.script[&key].get(*cursor).cloned();
        *cursor += 1;
        match reply {
            None => Err(BackendError::new(
                BackendErrorKind::ScriptExhausted,
                format!("script key {key:?} has no reply left"),
            )),
            Some(MockReply::Text(content)) => Ok(ChatResponse {
                content,
                usage: Usage::default(),
                latency_ms: 0,
            }),
            Some(MockReply::Full {
                content,
                prompt_tokens,
                completion_tokens,
            }) => Ok(ChatResponse {
                content,
                usage: Usage {
                    prompt_tokens,
                    completion_tokens,
                },
                latency_ms: 0,
            }),
            Some(MockReply::Error {
                error,
                status,
                detail,
            }) => Err(BackendError {
                kind: error,
                status,
                detail,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, RetryPolicy, Retrying};

    fn req(agent: Option<&str>) -> ChatRequest {
        let r = ChatRequest::new("m", vec![ChatMessage::user("hi")]);
        match agent {
            Some(a) => r.with_agent(a),
            None => r,
        }
    }

    #[test]
    fn scripted_text() {
        let mock = MockBackend::sequence(["hello"]);
        let resp = mock.complete(&req(None)).unwrap();
        assert_eq!(resp.content, "hello");
        assert_eq!(resp.usage, Usage::default());
    }

    #[test]
    fn keyed_by_agent_then_exhausted() {
        let mock = MockBackend::from_json(r#"{"melody": ["abc1"]}"#).unwrap();
        assert_eq!(mock.complete(&req(Some("melody"))).unwrap().content, "abc1");
        let err = mock.complete(&req(Some("melody"))).unwrap_err();
        assert_eq!(err.kind, BackendErrorKind::ScriptExhausted);
    }

    #[test]
    fn keyed_by_turn_index() {
        let script = r#"{"0": ["a"], "1": ["b"], "2": ["c"], "3": ["d"], "4": ["e"], "5": ["f"]}"#;
        let mock = MockBackend::from_json(script).unwrap();
        let got: Vec<String> = (0..6)
            .map(|i| mock.complete(&req(Some(if i % 2 == 0 { "x" } else { "y" }))).unwrap().content)
            .collect();
        assert_eq!(got, ["a", "b", "c", "d", "e", "f"]);
        assert!(mock.complete(&req(None)).is_err());
    }

    #[test]
    fn usage_and_errors_from_json() {
        let script = r#"{"*": [{"content": "x", "prompt_tokens": 10, "completion_tokens": 5},
                              {"error": "http_status", "status": 503}]}"#;
        let mock = MockBackend::from_json(script).unwrap();
        assert_eq!(mock.complete(&req(None)).unwrap().usage.total(), 15);
        let err = mock.complete(&req(None)).unwrap_err();
        assert_eq!((err.kind, err.status), (BackendErrorKind::HttpStatus, Some(503)));
        assert!(MockBackend::from_json("{}").is_err());
        assert!(MockBackend::from_json("[").is_err());
    }

    #[test]
    fn retry_then_succeed() {
        let script = r#"{"*": [{"error": "timeout"}, {"error": "http_status", "status": 502}, "ok"]}"#;
        let mock = MockBackend::from_json(script).unwrap();
        let backend = Retrying::new(mock, RetryPolicy::no_delay(3));
        assert_eq!(backend.complete(&req(None)).unwrap().content, "ok");
        assert_eq!(backend.inner().call_count(), 3);
    }

    #[test]
    fn retries_exhausted() {
        let script = r#"{"*": [{"error": "timeout"}, {"error": "timeout"}, {"error": "timeout"}, {"error": "timeout"}]}"#;
        let backend = Retrying::new(MockBackend::from_json(script).unwrap(), RetryPolicy::no_delay(2));
        let err = backend.complete(&req(None)).unwrap_err();
        assert_eq!(err.kind, BackendErrorKind::ExhaustedRetries);
        assert_eq!(backend.inner().call_count(), 3);
    }

    #[test]
    fn permanent_errors_are_not_retried() {
        let script = r#"{"*": [{"error": "http_status", "status": 401}, "never"]}"#;
        let backend = Retrying::new(MockBackend::from_json(script).unwrap(), RetryPolicy::no_delay(3));
        assert_eq!(backend.complete(&req(None)).unwrap_err().status, Some(401));
        assert_eq!(backend.inner().call_count(), 1);
    }

    #[test]
    fn concurrent_use_consumes_each_reply_once() {
        let mock = MockBackend::sequence((0..64).map(|i| MockReply::Text(i.to_string())));
        let mut got: Vec<usize> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|_| {
                    s.spawn(|| {
                        (0..8)
                            .map(|_| mock.complete(&req(None)).unwrap().content.parse::<usize>().unwrap())
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        got.sort();
        assert_eq!(got, (0..64).collect::<Vec<_>>());
    }
}
