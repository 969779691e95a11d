use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{BackendError, BackendErrorKind, ChatBackend};
use super::types::{ChatRequest, ChatResponse, Usage};

pub const API_KEY_ENV: &str = "COMPOSERX_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";
pub const DEFAULT_MODEL: &str = "gpt-4-turbo";
pub const DEFAULT_TIMEOUT_S: u64 = 120;

/// Connection settings shared by the CLI and library callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub retries: u32,
    pub timeout_s: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            model: DEFAULT_MODEL.to_string(),
            temperature: super::types::DEFAULT_TEMPERATURE,
            max_tokens: None,
            retries: super::backend::DEFAULT_RETRIES,
            timeout_s: DEFAULT_TIMEOUT_S,
        }
    }
}

/// Client for `POST {base_url}/v1/chat/completions`.
pub struct OpenAiBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl OpenAiBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::new(BackendErrorKind::Config, e.to_string()))?;
        Ok(OpenAiBackend {
            endpoint: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            client,
        })
    }

    /// Reads the API key from `COMPOSERX_API_KEY`.
    pub fn from_config(config: &GatewayConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        OpenAiBackend::new(&config.base_url, key, Duration::from_secs(config.timeout_s))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// JSON body sent for a request; speaker tags and the agent name stay local.
pub fn wire_body(request: &ChatRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
        .collect();
    let mut body = json!({
        "model": request.model,
        "messages": messages,
        "temperature": request.temperature,
    });
    if let Some(max) = request.max_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

/// Pulls `choices[0].message.content` and the usage counters from a reply.
pub fn parse_reply(body: &str) -> Result<(String, Usage), BackendError> {
    let malformed = |d: String| BackendError::new(BackendErrorKind::MalformedBody, d);
    let value: Value = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing choices[0].message.content".into()))?;
    let count = |field: &str| {
        value
            .pointer(&format!("/usage/{field}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok((
        content.to_string(),
        Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
        },
    ))
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request
            .check()
            .map_err(|e| BackendError::new(BackendErrorKind::InvalidRequest, e))?;
        let started = Instant::now();
        let mut call = self.client.post(&self.endpoint).json(&wire_body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| {
            let kind = if e.is_timeout() {
                BackendErrorKind::Timeout
            } else {
                BackendErrorKind::Transport
            };
            BackendError::new(kind, e.to_string())
        })?;
        let status = response.status();
        let body = response.text().map_err(|e| {
            let kind = if e.is_timeout() {
                BackendErrorKind::Timeout
            } else {
                BackendErrorKind::MalformedBody
            };
            BackendError::new(kind, e.to_string())
        })?;
        if !status.is_success() {
            let snippet: String = body.chars().take(300).collect();
            return Err(BackendError::http(status.as_u16(), snippet));
        }
        let (content, usage) = parse_reply(&body)?;
        Ok(ChatResponse {
            content,
            usage,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
