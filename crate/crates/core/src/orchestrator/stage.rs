use std::fmt;

use serde::{Deserialize, Serialize};

use super::roles::AgentRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Planning,
    ComposingMelody,
    ComposingHarmony,
    ComposingInstrument,
    Reviewing,
    RevisingMelody,
    RevisingHarmony,
    RevisingInstrument,
    Arranging,
    Done,
    Aborted,
}

/// Every transition the state machine may take. Any non-terminal stage may
/// also move to `Aborted`, and `Arranging` is reachable from `Reviewing`
/// directly (review budget spent or early approval).
pub const EDGES: &[(Stage, Stage)] = &[
    (Stage::Planning, Stage::ComposingMelody),
    (Stage::ComposingMelody, Stage::ComposingHarmony),
    (Stage::ComposingHarmony, Stage::ComposingInstrument),
    (Stage::ComposingInstrument, Stage::Reviewing),
    (Stage::Reviewing, Stage::RevisingMelody),
    (Stage::Reviewing, Stage::Arranging),
    (Stage::RevisingMelody, Stage::RevisingHarmony),
    (Stage::RevisingHarmony, Stage::RevisingInstrument),
    (Stage::RevisingInstrument, Stage::Reviewing),
    (Stage::Arranging, Stage::Done),
];

impl Stage {
    pub fn is_terminal(self) -> bool {
        matches!(self, Stage::Done | Stage::Aborted)
    }

    /// The agent that speaks in this stage, if any.
    pub fn speaker(self) -> Option<AgentRole> {
        Some(match self {
            Stage::Planning => AgentRole::Leader,
            Stage::ComposingMelody | Stage::RevisingMelody => AgentRole::Melody,
            Stage::ComposingHarmony | Stage::RevisingHarmony => AgentRole::Harmony,
            Stage::ComposingInstrument | Stage::RevisingInstrument => AgentRole::Instrument,
            Stage::Reviewing => AgentRole::Reviewer,
            Stage::Arranging => AgentRole::Arrangement,
            Stage::Done | Stage::Aborted => return None,
        })
    }

    pub fn is_legal_transition(from: Stage, to: Stage) -> bool {
        (to == Stage::Aborted && !from.is_terminal()) || EDGES.contains(&(from, to))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Planning => "planning",
            Stage::ComposingMelody => "composing_melody",
            Stage::ComposingHarmony => "composing_harmony",
            Stage::ComposingInstrument => "composing_instrument",
            Stage::Reviewing => "reviewing",
            Stage::RevisingMelody => "revising_melody",
            Stage::RevisingHarmony => "revising_harmony",
            Stage::RevisingInstrument => "revising_instrument",
            Stage::Arranging => "arranging",
            Stage::Done => "done",
            Stage::Aborted => "aborted",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_stages_have_no_speaker() {
        assert_eq!(Stage::Done.speaker(), None);
        assert_eq!(Stage::Aborted.speaker(), None);
        assert_eq!(Stage::Planning.speaker(), Some(AgentRole::Leader));
        assert_eq!(Stage::Reviewing.speaker(), Some(AgentRole::Reviewer));
        assert!(!Stage::is_legal_transition(Stage::Done, Stage::Aborted));
        assert!(!Stage::is_legal_transition(Stage::Planning, Stage::Reviewing));
    }

    #[test]
    fn every_edge_leaves_a_speaking_stage() {
        for (from, _) in EDGES {
            assert!(from.speaker().is_some());
        }
    }
}
