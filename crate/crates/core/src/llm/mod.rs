//! Chat-completion gateway: request types, the backend trait, retries, an
//! OpenAI-compatible HTTP client and a scripted mock.

mod backend;
mod mock;
mod openai;
mod types;

pub use backend::{BackendError, BackendErrorKind, ChatBackend, RetryPolicy, Retrying, DEFAULT_RETRIES};
pub use mock::{MockBackend, MockCall, MockReply, MockScript};
pub use openai::{
    parse_reply, wire_body, GatewayConfig, OpenAiBackend, API_KEY_ENV, DEFAULT_BASE_URL, DEFAULT_MODEL,
    DEFAULT_TIMEOUT_S,
};
pub use types::{ChatMessage, ChatRequest, ChatResponse, Role, Usage, DEFAULT_TEMPERATURE};
