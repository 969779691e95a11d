use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abc::{Pitch, VoicePart};

const DEFAULT_TABLE: &str = include_str!("../../data/ranges.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentRange {
    pub low_midi: u8,
    pub high_midi: u8,
}

impl InstrumentRange {
    pub fn new(low_midi: u8, high_midi: u8) -> Option<Self> {
        (low_midi <= high_midi && high_midi <= 127).then_some(InstrumentRange {
            low_midi,
            high_midi,
        })
    }

    pub fn contains(&self, midi: i32) -> bool {
        (self.low_midi as i32..=self.high_midi as i32).contains(&midi)
    }
}

#[derive(Debug, Error)]
pub enum RangeTableError {
    #[error("range table line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("reading range table: {0}")]
    Io(#[from] std::io::Error),
}

/// Pitch limits per instrument name and per General MIDI program.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeTable {
    pub by_name: BTreeMap<String, InstrumentRange>,
    pub by_program: BTreeMap<u8, InstrumentRange>,
}

/// Lowercase with runs of whitespace collapsed to one space.
pub fn canonical_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl RangeTable {
    /// The bundled table (`data/ranges.txt`).
    pub fn default_table() -> Self {
        RangeTable::parse(DEFAULT_TABLE).expect("bundled range table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RangeTableError> {
        RangeTable::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, RangeTableError> {
        let mut table = RangeTable::default();
        for (idx, raw) in text.lines().enumerate() {
            // '#' starts a comment only at a word boundary, so F#3 survives.
            let cut = raw
                .char_indices()
                .find(|&(i, c)| c == '#' && (i == 0 || raw[..i].ends_with(char::is_whitespace)))
                .map_or(raw.len(), |(i, _)| i);
            let line = raw[..cut].trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| RangeTableError::Syntax {
                line: idx + 1,
                reason,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() < 3 {
                return Err(err("expected `<name> <low> <high>`".into()));
            }
            let (name, bounds) = tokens.split_at(tokens.len() - 2);
            let midi = |s: &str| {
                Pitch::from_scientific(s)
                    .and_then(|p| p.midi_number().ok())
                    .ok_or_else(|| err(format!("invalid pitch {s:?}")))
            };
            let (low, high) = (midi(bounds[0])?, midi(bounds[1])?);
            let range = InstrumentRange::new(low, high)
                .ok_or_else(|| err(format!("low {} above high {}", bounds[0], bounds[1])))?;
            let name = name.join(" ");
            match name.parse::<u8>() {
                Ok(program) if program <= 127 => {
                    table.by_program.insert(program, range);
                }
                Ok(program) => return Err(err(format!("MIDI program {program} out of range"))),
                Err(_) => {
                    table.by_name.insert(canonical_name(&name), range);
                }
            }
        }
        Ok(table)
    }

    pub fn lookup_name(&self, name: &str) -> Option<InstrumentRange> {
        self.by_name.get(&canonical_name(name)).copied()
    }

    pub fn lookup_program(&self, program: u8) -> Option<InstrumentRange> {
        self.by_program.get(&program).copied()
    }

    /// Range for a voice: exact name, then the longest table name found as
    /// whole words inside the voice name, then the MIDI program. The voice
    /// id stands in for a missing name. Returns the matched label too.
    pub fn resolve(&self, voice: &VoicePart) -> Option<(String, InstrumentRange)> {
        let label = voice.name.as_deref().unwrap_or(&voice.voice_id);
        let canonical = canonical_name(label);
        if let Some(r) = self.by_name.get(&canonical) {
            return Some((canonical, *r));
        }
        let padded = format!(" {canonical} ");
        let contained = self
            .by_name
            .iter()
            .filter(|(name, _)| padded.contains(&format!(" {name} ")))
            .max_by_key(|(name, _)| name.len());
        if let Some((name, r)) = contained {
            return Some((name.clone(), *r));
        }
        let program = voice.midi_program?;
        self.lookup_program(program)
            .map(|r| (format!("program {program}"), r))
    }
}
