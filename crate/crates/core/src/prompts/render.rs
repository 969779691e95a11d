use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::{IclExample, UserPrompt};
use super::templates::*;
use crate::llm::ChatMessage;

/// One prompt rendering of a single-agent method. CoT is split into its
/// three steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleAgentMethod {
    Ori,
    Role,
    CotStep1,
    CotStep2,
    CotStep3,
    Icl,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("{method:?} needs {needed} earlier output(s), got {got}")]
    MissingContext {
        method: SingleAgentMethod,
        needed: usize,
        got: usize,
    },
    #[error("icl needs at least one example")]
    MissingExamples,
}

fn bars_of(prompt: &UserPrompt) -> u32 {
    prompt.attributes.bars.unwrap_or(DEFAULT_COT_BARS)
}

pub fn cot_step2_text(bars: u32) -> String {
    COT_STEP2_TEMPLATE.replace("{bars}", &bars.to_string())
}

pub fn cot_step3_text(bars: u32) -> String {
    COT_STEP3_TEMPLATE.replace("{bars}", &bars.to_string())
}

/// ICL system text: the instruction followed by each example in a fence.
pub fn icl_system_text(examples: &[IclExample]) -> String {
    let mut out = ICL_TEMPLATE.to_string();
    for (i, ex) in examples.iter().enumerate() {
        out.push_str(&format!("\n\nExample {}: {}\n```\n{}\n```", i + 1, ex.description, ex.abc.trim_end()));
    }
    out
}

/// Messages for one single-agent request.
///
/// CoT steps form one growing conversation: step 2 replays step 1 and its
/// answer, then asks for the chord progression with the header quoted;
/// step 3 does the same with both earlier answers. `context` holds those
/// earlier answers in order.
pub fn render_single_agent(
    method: SingleAgentMethod,
    prompt: &UserPrompt,
    context: &[String],
    examples: &[IclExample],
) -> Result<Vec<ChatMessage>, RenderError> {
    let needed = match method {
        SingleAgentMethod::CotStep2 => 1,
        SingleAgentMethod::CotStep3 => 2,
        _ => 0,
    };
    if context.len() < needed {
        return Err(RenderError::MissingContext {
            method,
            needed,
            got: context.len(),
        });
    }
    let user = ChatMessage::user(prompt.text.clone());
    let bars = bars_of(prompt);
    let messages = match method {
        SingleAgentMethod::Ori => vec![ChatMessage::system(ORI_TEMPLATE), user],
        SingleAgentMethod::Role => vec![ChatMessage::system(ROLE_TEMPLATE), user],
        SingleAgentMethod::Icl => {
            if examples.is_empty() {
                return Err(RenderError::MissingExamples);
            }
            vec![ChatMessage::system(icl_system_text(examples)), user]
        }
        SingleAgentMethod::CotStep1 => vec![ChatMessage::system(COT_STEP1_TEMPLATE), user],
        SingleAgentMethod::CotStep2 | SingleAgentMethod::CotStep3 => {
            let mut msgs = vec![ChatMessage::system(COT_STEP1_TEMPLATE), user];
            msgs.push(ChatMessage::assistant(context[0].clone()));
            msgs.push(ChatMessage::user(format!(
                "{}\n\nSong information:\n{}",
                cot_step2_text(bars),
                context[0]
            )));
            if method == SingleAgentMethod::CotStep3 {
                msgs.push(ChatMessage::assistant(context[1].clone()));
                msgs.push(ChatMessage::user(format!(
                    "{}\n\nSong information:\n{}\n\nChord progression:\n{}",
                    cot_step3_text(bars),
                    context[0],
                    context[1]
                )));
            }
            msgs
        }
    };
    Ok(messages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Role;
    use crate::prompts::{bundled_icl_examples, bundled_prompts};

    fn chanson() -> UserPrompt {
        bundled_prompts().into_iter().find(|p| p.id == "vintage-french-chanson").unwrap()
    }

    #[test]
    fn role_method_layout() {
        let msgs = render_single_agent(SingleAgentMethod::Role, &chanson(), &[], &[]).unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, Role::System);
        assert!(msgs[0].content.starts_with("You are a talented musician."));
        assert!(msgs[0].content.contains("Here are some tips for generating melodies"));
        assert_eq!(msgs[1].content, chanson().text);
    }

    #[test]
    fn cot_step2_interpolates_header() {
        let header = "X:1\nT:Vintage French Chanson\nM:4/4\nL:1/8\nK:C";
        let msgs = render_single_agent(SingleAgentMethod::CotStep2, &chanson(), &[header.into()], &[]).unwrap();
        let last = &msgs.last().unwrap().content;
        assert!(last.contains("***16-bar long*** chord progression"));
        assert!(last.contains("with each bar separated by a \"|\" symbol"));
        assert!(last.contains(header));
        assert_eq!(msgs[2].role, Role::Assistant);
    }

    #[test]
    fn cot_bar_count_follows_attributes() {
        let mut p = chanson();
        p.attributes.bars = Some(8);
        let msgs = render_single_agent(SingleAgentMethod::CotStep3, &p, &["h".into(), "C|G".into()], &[]).unwrap();
        let last = &msgs.last().unwrap().content;
        assert!(last.contains("***8-bar long*** piece of music"));
        assert!(last.contains("C|G"));
        p.attributes.bars = None;
        let msgs = render_single_agent(SingleAgentMethod::CotStep2, &p, &["h".into()], &[]).unwrap();
        assert!(msgs.last().unwrap().content.contains("16-bar long"));
    }

    #[test]
    fn preconditions() {
        let p = chanson();
        assert_eq!(
            render_single_agent(SingleAgentMethod::CotStep2, &p, &[], &[]),
            Err(RenderError::MissingContext {
                method: SingleAgentMethod::CotStep2,
                needed: 1,
                got: 0
            })
        );
        assert!(matches!(
            render_single_agent(SingleAgentMethod::CotStep3, &p, &["a".into()], &[]),
            Err(RenderError::MissingContext { .. })
        ));
        assert_eq!(
            render_single_agent(SingleAgentMethod::Icl, &p, &[], &[]),
            Err(RenderError::MissingExamples)
        );
    }

    #[test]
    fn icl_embeds_examples_and_is_deterministic() {
        let ex = bundled_icl_examples();
        let a = render_single_agent(SingleAgentMethod::Icl, &chanson(), &[], &ex[..1]).unwrap();
        let b = render_single_agent(SingleAgentMethod::Icl, &chanson(), &[], &ex[..1]).unwrap();
        assert_eq!(a, b);
        assert!(a[0].content.contains("Only return the ABC notation"));
        assert!(a[0].content.contains(ex[0].abc.trim_end()));
        assert!(!a[0].content.contains(ex[1].abc.trim_end()));
    }

    #[test]
    fn methods_differ_at_anchor() {
        let p = chanson();
        let ex = bundled_icl_examples();
        let systems: Vec<String> = [SingleAgentMethod::Ori, SingleAgentMethod::Role, SingleAgentMethod::CotStep1, SingleAgentMethod::Icl]
            .into_iter()
            .map(|m| render_single_agent(m, &p, &[], &ex).unwrap()[0].content.clone())
            .collect();
        for i in 0..systems.len() {
            for j in i + 1..systems.len() {
                assert_ne!(systems[i], systems[j]);
            }
        }
    }
}
