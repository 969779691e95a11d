use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Leader,
    Melody,
    Harmony,
    Instrument,
    Reviewer,
    Arrangement,
    UserProxy,
}

impl AgentRole {
    pub const ALL: [AgentRole; 7] = [
        AgentRole::Leader,
        AgentRole::Melody,
        AgentRole::Harmony,
        AgentRole::Instrument,
        AgentRole::Reviewer,
        AgentRole::Arrangement,
        AgentRole::UserProxy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Leader => "leader",
            AgentRole::Melody => "melody",
            AgentRole::Harmony => "harmony",
            AgentRole::Instrument => "instrument",
            AgentRole::Reviewer => "reviewer",
            AgentRole::Arrangement => "arrangement",
            AgentRole::UserProxy => "user_proxy",
        }
    }

    /// Roles whose artifact is ABC rather than free text.
    pub fn writes_abc(self) -> bool {
        matches!(
            self,
            AgentRole::Melody | AgentRole::Harmony | AgentRole::Instrument | AgentRole::Arrangement
        )
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == key)
            .ok_or_else(|| format!("unknown agent role {s:?}"))
    }
}
