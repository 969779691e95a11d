use std::collections::HashSet;

use log::warn;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::store::{prompt_from_value, UserPrompt};
use super::templates::SELF_INSTRUCT_TEMPLATE;
use crate::llm::{BackendError, BackendErrorKind, ChatBackend, ChatMessage, ChatRequest};

/// Seeds shown to the model per request.
pub const SEEDS_PER_REQUEST: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub prompts: Vec<UserPrompt>,
    /// One line per dropped record, or one for an unreadable reply.
    pub warnings: Vec<String>,
}

pub fn self_instruct_message(seeds: &[&UserPrompt], n: usize) -> String {
    let shown: Vec<String> = seeds
        .iter()
        .map(|p| {
            serde_json::json!({"text": p.text, "attributes": p.attributes}).to_string()
        })
        .collect();
    SELF_INSTRUCT_TEMPLATE
        .replace("{seeds}", &shown.join("\n"))
        .replace("{n}", &n.to_string())
}

/// Finds the JSON array in a reply: a fenced block if there is one,
/// otherwise the span from the first '[' to the last ']'.
fn json_array(reply: &str) -> Option<Vec<Value>> {
    let mut candidates = Vec::new();
    let mut rest = reply;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let Some(end) = after[body_start..].find("```") else { break };
        candidates.push(&after[body_start..body_start + end]);
        rest = &after[body_start + end + 3..];
    }
    if let (Some(a), Some(b)) = (reply.find('['), reply.rfind(']')) {
        if a < b {
            candidates.push(&reply[a..=b]);
        }
    }
    candidates
        .into_iter()
        .find_map(|c| serde_json::from_str::<Vec<Value>>(c.trim()).ok())
}

fn fresh_id(taken: &mut HashSet<String>, counter: &mut usize) -> String {
    loop {
        *counter += 1;
        let id = format!("gen-{counter}");
        if taken.insert(id.clone()) {
            return id;
        }
    }
}

/// Asks the backend for `n` new prompts modelled on up to three seeds drawn
/// with `seed`. Generated ids avoid every id in `seeds`.
pub fn expand_prompts(
    seeds: &[UserPrompt],
    n: usize,
    backend: &dyn ChatBackend,
    model: &str,
    seed: u64,
) -> Result<Expansion, BackendError> {
    if seeds.is_empty() || n == 0 {
        return Err(BackendError::new(
            BackendErrorKind::InvalidRequest,
            "expansion needs at least one seed and n > 0",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = SEEDS_PER_REQUEST.min(seeds.len());
    let sample: Vec<&UserPrompt> = seeds.choose_multiple(&mut rng, k).collect();
    let request = ChatRequest::new(
        model,
        vec![ChatMessage::user(self_instruct_message(&sample, n))],
    )
    .with_agent("self_instruct");
    let reply = backend.complete(&request)?;

    let mut warnings = Vec::new();
    let mut prompts = Vec::new();
    let Some(records) = json_array(&reply.content) else {
        let w = "reply holds no JSON array of prompt records".to_string();
        warn!("{w}");
        warnings.push(w);
        return Ok(Expansion { prompts, warnings });
    };
    let mut taken: HashSet<String> = seeds.iter().map(|p| p.id.clone()).collect();
    let mut counter = 0;
    for (i, mut record) in records.into_iter().enumerate() {
        if prompts.len() == n {
            break;
        }
        let Some(obj) = record.as_object_mut() else {
            let w = format!("generated record {i}: not an object");
            warn!("{w}");
            warnings.push(w);
            continue;
        };
        obj.insert("id".into(), Value::String("pending".into()));
        match prompt_from_value(i, &record) {
            Ok(mut p) => {
                p.id = fresh_id(&mut taken, &mut counter);
                prompts.push(p);
            }
            Err(e) => {
                let w = format!("generated {e}");
                warn!("{w}");
                warnings.push(w);
            }
        }
    }
    Ok(Expansion { prompts, warnings })
}
