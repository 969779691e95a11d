use std::fmt;
use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{ChatRequest, ChatResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Timeout,
    HttpStatus,
    MalformedBody,
    ExhaustedRetries,
    ScriptExhausted,
    Transport,
    Config,
    InvalidRequest,
}

impl fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackendErrorKind::Timeout => "timeout",
            BackendErrorKind::HttpStatus => "http_status",
            BackendErrorKind::MalformedBody => "malformed_body",
            BackendErrorKind::ExhaustedRetries => "exhausted_retries",
            BackendErrorKind::ScriptExhausted => "script_exhausted",
            BackendErrorKind::Transport => "transport",
            BackendErrorKind::Config => "config",
            BackendErrorKind::InvalidRequest => "invalid_request",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}{}: {detail}", status.map(|s| format!(" {s}")).unwrap_or_default())]
pub struct BackendError {
    pub kind: BackendErrorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub detail: String,
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, detail: impl Into<String>) -> Self {
        BackendError {
            kind,
            status: None,
            detail: detail.into(),
        }
    }

    pub fn http(status: u16, detail: impl Into<String>) -> Self {
        BackendError {
            kind: BackendErrorKind::HttpStatus,
            status: Some(status),
            detail: detail.into(),
        }
    }

    /// Timeouts, transport failures, 429 and 5xx are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self.kind {
            BackendErrorKind::Timeout | BackendErrorKind::Transport => true,
            BackendErrorKind::HttpStatus => self.status.is_some_and(|s| s == 429 || s >= 500),
            _ => false,
        }
    }
}

/// A chat-completion service. Implementations must tolerate concurrent calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

pub const DEFAULT_RETRIES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: DEFAULT_RETRIES,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(retries: u32) -> Self {
        RetryPolicy {
            retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `attempt` (1-based): base * 2^(attempt-1).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Retries transient failures of the inner backend with exponential backoff.
pub struct Retrying<B> {
    inner: B,
    policy: RetryPolicy,
}

impl<B: ChatBackend> Retrying<B> {
    pub fn new(inner: B, policy: RetryPolicy) -> Self {
        Retrying { inner, policy }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for Retrying<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut attempt = 0;
        loop {
            match self.inner.complete(request) {
                Ok(resp) => return Ok(resp),
                Err(e) if !e.is_transient() => return Err(e),
                Err(e) if attempt >= self.policy.retries => {
                    return Err(BackendError {
                        kind: BackendErrorKind::ExhaustedRetries,
                        status: e.status,
                        detail: format!("{} attempts failed; last error: {e}", attempt + 1),
                    })
                }
                Err(e) => {
                    attempt += 1;
                    let delay = self.policy.delay(attempt);
                    warn!("backend call failed ({e}); retry {attempt}/{} in {delay:?}", self.policy.retries);
                    thread::sleep(delay);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            retries: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(350));
        assert_eq!(p.delay(40), Duration::from_millis(350));
    }

    #[test]
    fn transient_classification() {
        assert!(BackendError::http(503, "").is_transient());
        assert!(BackendError::http(429, "").is_transient());
        assert!(!BackendError::http(400, "").is_transient());
        assert!(BackendError::new(BackendErrorKind::Timeout, "").is_transient());
        assert!(!BackendError::new(BackendErrorKind::MalformedBody, "").is_transient());
        assert!(!BackendError::new(BackendErrorKind::ScriptExhausted, "").is_transient());
    }

    #[test]
    fn display() {
        assert_eq!(BackendError::http(500, "oops").to_string(), "http_status 500: oops");
        assert_eq!(BackendError::new(BackendErrorKind::Timeout, "slow").to_string(), "timeout: slow");
    }
}
