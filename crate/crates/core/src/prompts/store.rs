use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::abc::{parse_tune, ParseError};

const BUNDLED_PROMPTS: &str = include_str!("../../data/prompts.json");
const BUNDLED_ICL: &str = include_str!("../../data/icl_examples.json");

/// Structured attributes of a composition request.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAttributes {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tempo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feeling: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chord_progression: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bars: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruments: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motif: Option<String>,
    /// Attributes outside the fixed schema, kept as given.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPrompt {
    pub id: String,
    pub text: String,
    pub attributes: PromptAttributes,
}

impl UserPrompt {
    /// A prompt with no structured attributes, for inline text requests.
    pub fn inline(id: impl Into<String>, text: impl Into<String>) -> Self {
        UserPrompt {
            id: id.into(),
            text: text.into(),
            attributes: PromptAttributes::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IclExample {
    pub description: String,
    pub abc: String,
}

#[derive(Debug, Error)]
pub enum PromptStoreError {
    #[error("record {record_index}: field `{field}`: {reason}")]
    Schema {
        record_index: usize,
        field: String,
        reason: String,
    },
    #[error("duplicate prompt id {0:?}")]
    DuplicateId(String),
    #[error("ICL example {index} does not parse: {source}")]
    InvalidExample {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn read(path: &Path) -> Result<String, PromptStoreError> {
    std::fs::read_to_string(path).map_err(|source| PromptStoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn schema(record_index: usize, field: &str, reason: impl Into<String>) -> PromptStoreError {
    PromptStoreError::Schema {
        record_index,
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn opt_string(idx: usize, attrs: &serde_json::Map<String, Value>, field: &str) -> Result<(), PromptStoreError> {
    match attrs.get(field) {
        None | Some(Value::Null) | Some(Value::String(_)) => Ok(()),
        Some(_) => Err(schema(idx, &format!("attributes.{field}"), "expected a string")),
    }
}

fn opt_string_list(idx: usize, attrs: &serde_json::Map<String, Value>, field: &str) -> Result<(), PromptStoreError> {
    let path = format!("attributes.{field}");
    match attrs.get(field) {
        None | Some(Value::Null) => Ok(()),
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                match item.as_str() {
                    Some(s) if !s.trim().is_empty() => {}
                    _ => return Err(schema(idx, &format!("{path}[{i}]"), "expected a nonempty string")),
                }
            }
            Ok(())
        }
        Some(_) => Err(schema(idx, &path, "expected an array of strings")),
    }
}

/// Checks one JSON record against the prompt schema and converts it.
pub fn prompt_from_value(idx: usize, value: &Value) -> Result<UserPrompt, PromptStoreError> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema(idx, "", "expected an object"))?;
    for field in ["id", "text"] {
        match obj.get(field) {
            Some(Value::String(s)) if !s.trim().is_empty() => {}
            Some(Value::String(_)) => return Err(schema(idx, field, "must not be empty")),
            Some(_) => return Err(schema(idx, field, "expected a string")),
            None => return Err(schema(idx, field, "missing")),
        }
    }
    let attrs = match obj.get("attributes") {
        Some(Value::Object(a)) => a,
        Some(_) => return Err(schema(idx, "attributes", "expected an object")),
        None => return Err(schema(idx, "attributes", "missing")),
    };
    match attrs.get("name") {
        Some(Value::String(_)) => {}
        Some(_) => return Err(schema(idx, "attributes.name", "expected a string")),
        None => return Err(schema(idx, "attributes.name", "missing")),
    }
    for field in ["tempo", "feeling", "key", "genre", "style", "motif"] {
        opt_string(idx, attrs, field)?;
    }
    for field in ["chord_progression", "instruments"] {
        opt_string_list(idx, attrs, field)?;
    }
    match attrs.get("bars") {
        None | Some(Value::Null) => {}
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => {}
            _ => return Err(schema(idx, "attributes.bars", "expected a positive integer")),
        },
    }
    serde_json::from_value(value.clone()).map_err(|e| schema(idx, "", e.to_string()))
}

/// Parses a prompt set from JSON text (an array of records).
pub fn parse_prompt_set(text: &str) -> Result<Vec<UserPrompt>, PromptStoreError> {
    let value: Value = serde_json::from_str(text)?;
    let records = value
        .as_array()
        .ok_or_else(|| schema(0, "", "prompt set must be a JSON array"))?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (idx, record) in records.iter().enumerate() {
        let prompt = prompt_from_value(idx, record)?;
        if !seen.insert(prompt.id.clone()) {
            return Err(PromptStoreError::DuplicateId(prompt.id));
        }
        out.push(prompt);
    }
    Ok(out)
}

pub fn load_prompt_set(path: impl AsRef<Path>) -> Result<Vec<UserPrompt>, PromptStoreError> {
    parse_prompt_set(&read(path.as_ref())?)
}

/// Writes a prompt set as a pretty-printed JSON array.
pub fn save_prompt_set(path: impl AsRef<Path>, prompts: &[UserPrompt]) -> Result<(), PromptStoreError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(prompts)?;
    std::fs::write(path, text + "\n").map_err(|source| PromptStoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The starter prompt set shipped with the crate.
pub fn bundled_prompts() -> Vec<UserPrompt> {
    parse_prompt_set(BUNDLED_PROMPTS).expect("bundled prompt set is valid")
}

/// Parses an ICL store and checks that every example's ABC parses.
pub fn parse_icl_examples(text: &str) -> Result<Vec<IclExample>, PromptStoreError> {
    let examples: Vec<IclExample> = serde_json::from_str(text)?;
    for (index, ex) in examples.iter().enumerate() {
        parse_tune(&ex.abc).map_err(|source| PromptStoreError::InvalidExample { index, source })?;
    }
    Ok(examples)
}

pub fn load_icl_examples(path: impl AsRef<Path>) -> Result<Vec<IclExample>, PromptStoreError> {
    parse_icl_examples(&read(path.as_ref())?)
}

pub fn bundled_icl_examples() -> Vec<IclExample> {
    parse_icl_examples(BUNDLED_ICL).expect("bundled ICL examples are valid")
}
