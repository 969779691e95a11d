use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    /// Which agent said this, for transcripts. Never sent on the wire.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_tag: Option<String>,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
            speaker_tag: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::Assistant, content)
    }

    pub fn tagged(mut self, tag: impl Into<String>) -> Self {
        self.speaker_tag = Some(tag.into());
        self
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Agent making the call; lets the mock backend route replies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            agent: None,
        }
    }

    pub fn with_agent(mut self, agent: impl Into<String>) -> Self {
        self.agent = Some(agent.into());
        self
    }

    /// Checks the request invariants; returns a description of the first
    /// violation.
    pub fn check(&self) -> Result<(), String> {
        let first = self.messages.first().ok_or("request has no messages")?;
        if first.role == Role::Assistant {
            return Err("first message must be system or user".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_tokens == Some(0) {
            return Err("max_tokens must be positive".into());
        }
        if let Some(m) = self
            .messages
            .iter()
            .find(|m| m.role != Role::Assistant && m.content.is_empty())
        {
            return Err(format!("empty {} message", m.role.as_str()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_checks() {
        let ok = ChatRequest::new("m", vec![ChatMessage::system("s"), ChatMessage::user("u")]);
        assert!(ok.check().is_ok());
        assert!(ChatRequest::new("m", vec![]).check().is_err());
        assert!(ChatRequest::new("m", vec![ChatMessage::assistant("a")]).check().is_err());
        let mut hot = ok.clone();
        hot.temperature = 2.5;
        assert!(hot.check().is_err());
        let mut zero = ok;
        zero.max_tokens = Some(0);
        assert!(zero.check().is_err());
    }

    #[test]
    fn usage_sums() {
        let mut u = Usage::default();
        u += Usage { prompt_tokens: 3, completion_tokens: 4 };
        u += Usage { prompt_tokens: 1, completion_tokens: 1 };
        assert_eq!(u.total(), 9);
    }
}
