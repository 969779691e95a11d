use composerx::llm::{
    BackendErrorKind, ChatBackend, ChatMessage, ChatRequest, MockBackend, MockReply, RetryPolicy, Retrying, Usage,
};
use proptest::prelude::*;

fn reply() -> impl Strategy<Value = MockReply> {
    prop_oneof![
        (0u64..50, 0u64..50).prop_map(|(p, c)| MockReply::Full { content: "ok".into(), prompt_tokens: p, completion_tokens: c }),
        Just(MockReply::Error { error: BackendErrorKind::Timeout, status: None, detail: String::new() }),
        Just(MockReply::Error { error: BackendErrorKind::HttpStatus, status: Some(503), detail: String::new() }),
        Just(MockReply::Error { error: BackendErrorKind::HttpStatus, status: Some(401), detail: String::new() }),
    ]
}

fn request() -> ChatRequest {
    ChatRequest::new("m", vec![ChatMessage::user("hi")])
}

proptest! {
    #[test]
    fn retries_stay_within_budget(replies in prop::collection::vec(reply(), 1..12), budget in 0u32..5) {
        let backend = Retrying::new(MockBackend::sequence(replies), RetryPolicy::no_delay(budget));
        let _ = backend.complete(&request());
        prop_assert!(backend.inner().call_count() as u32 <= budget + 1);
    }

    #[test]
    fn usage_totals_add_up(replies in prop::collection::vec((0u64..1000, 0u64..1000), 1..10)) {
        let mock = MockBackend::sequence(replies.iter().map(|&(p, c)| MockReply::Full {
            content: "x".into(),
            prompt_tokens: p,
            completion_tokens: c,
        }));
        let mut total = Usage::default();
        for _ in &replies {
            total += mock.complete(&request()).unwrap().usage;
        }
        prop_assert_eq!(total.prompt_tokens, replies.iter().map(|r| r.0).sum::<u64>());
        prop_assert_eq!(total.completion_tokens, replies.iter().map(|r| r.1).sum::<u64>());
    }

    #[test]
    fn mock_is_deterministic(replies in prop::collection::vec(reply(), 1..8)) {
        let run = || {
            let mock = MockBackend::sequence(replies.clone());
            (0..replies.len()).map(|_| mock.complete(&request())).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
