use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::pitch::{Accidental, Letter, Pitch};
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum EventKind {
    Note(Pitch),
    Chord(Vec<Pitch>),
    Rest,
    MultiBarRest(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub kind: EventKind,
    /// Multiple of the unit note length. Always one for multi-bar rests.
    #[serde(with = "ratio::text")]
    pub duration: Rational,
    pub tie_to_next: bool,
    #[serde(with = "ratio::text")]
    pub tuplet_scale: Rational,
    /// Set on the first event of a tuplet group: the number of notes in the group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuplet_start: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chord_symbol: Option<String>,
}

impl NoteEvent {
    pub fn new(kind: EventKind, duration: Rational) -> Self {
        NoteEvent {
            kind,
            duration,
            tie_to_next: false,
            tuplet_scale: Rational::one(),
            tuplet_start: None,
            chord_symbol: None,
        }
    }

    pub fn note(pitch: Pitch, duration: Rational) -> Self {
        NoteEvent::new(EventKind::Note(pitch), duration)
    }

    pub fn rest(duration: Rational) -> Self {
        NoteEvent::new(EventKind::Rest, duration)
    }

    pub fn with_chord_symbol(mut self, symbol: impl Into<String>) -> Self {
        self.chord_symbol = Some(symbol.into());
        self
    }

    /// Length in unit-note-lengths. A multi-bar rest fills `count` whole bars.
    pub fn units(&self, bar_units: Rational) -> Rational {
        match self.kind {
            EventKind::MultiBarRest(count) => bar_units * Rational::from_integer(count as i64),
            _ => self.duration * self.tuplet_scale,
        }
    }

    pub fn pitches(&self) -> &[Pitch] {
        match &self.kind {
            EventKind::Note(p) => std::slice::from_ref(p),
            EventKind::Chord(ps) => ps,
            EventKind::Rest | EventKind::MultiBarRest(_) => &[],
        }
    }

    pub fn is_rest(&self) -> bool {
        matches!(self.kind, EventKind::Rest | EventKind::MultiBarRest(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftDelim {
    #[default]
    Plain,
    RepeatStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightDelim {
    #[default]
    Plain,
    RepeatEnd,
    Double,
    Final,
}

impl RightDelim {
    pub fn as_abc(self) -> &'static str {
        match self {
            RightDelim::Plain => "|",
            RightDelim::RepeatEnd => ":|",
            RightDelim::Double => "||",
            RightDelim::Final => "|]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Bar {
    pub events: Vec<NoteEvent>,
    pub left_delim: LeftDelim,
    pub right_delim: RightDelim,
}

impl Bar {
    pub fn new(events: Vec<NoteEvent>) -> Self {
        Bar {
            events,
            ..Bar::default()
        }
    }

    /// Number of metrical bars this bar occupies: the count of a lone
    /// multi-bar rest, otherwise one.
    pub fn span(&self) -> u32 {
        match self.events.as_slice() {
            [NoteEvent {
                kind: EventKind::MultiBarRest(n),
                ..
            }] => *n,
            _ => 1,
        }
    }

    /// Sum of event lengths in unit-note-lengths.
    pub fn units(&self, bar_units: Rational) -> Rational {
        self.events
            .iter()
            .fold(Rational::zero(), |acc, e| acc + e.units(bar_units))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VoicePart {
    pub voice_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub midi_program: Option<u8>,
    /// Remaining `V:` line tokens (`clef=bass`, ...), verbatim and in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub properties: Vec<String>,
    pub bars: Vec<Bar>,
}

impl VoicePart {
    pub fn new(voice_id: impl Into<String>) -> Self {
        VoicePart {
            voice_id: voice_id.into(),
            name: None,
            midi_program: None,
            properties: Vec::new(),
            bars: Vec::new(),
        }
    }

    /// Bar count with multi-bar rests expanded.
    pub fn measure_count(&self) -> usize {
        self.bars.iter().map(|b| b.span() as usize).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meter {
    pub numerator: u32,
    pub denominator: u32,
}

impl Meter {
    pub fn new(numerator: u32, denominator: u32) -> Self {
        Meter {
            numerator,
            denominator,
        }
    }

    /// Bar length as a fraction of a whole note.
    pub fn bar_length(&self) -> Rational {
        Rational::new(self.numerator as i64, self.denominator as i64)
    }

    /// 6/8, 9/8, 12/8 and the like.
    pub fn is_compound(&self) -> bool {
        self.numerator > 3 && self.numerator.is_multiple_of(3)
    }
}

impl fmt::Display for Meter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Major,
    Minor,
    /// Any other mode string, kept as written and not interpreted.
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Key {
    pub tonic: Letter,
    pub accidental: Accidental,
    pub mode: Mode,
}

const MAJOR_STEPS: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR_STEPS: [i32; 7] = [0, 2, 3, 5, 7, 8, 10];

impl Key {
    pub fn new(tonic: Letter, accidental: Accidental, mode: Mode) -> Self {
        Key {
            tonic,
            accidental,
            mode,
        }
    }

    pub fn major(tonic: Letter) -> Self {
        Key::new(tonic, Accidental::None, Mode::Major)
    }

    pub fn tonic_pitch_class(&self) -> i32 {
        (self.tonic.pitch_class() + self.accidental.semitones()).rem_euclid(12)
    }

    pub fn is_interpreted(&self) -> bool {
        !matches!(self.mode, Mode::Other(_))
    }

    fn steps(&self) -> Option<&'static [i32; 7]> {
        match self.mode {
            Mode::Major => Some(&MAJOR_STEPS),
            Mode::Minor => Some(&MINOR_STEPS),
            Mode::Other(_) => None,
        }
    }

    /// The seven diatonic pitch classes (natural minor for minor keys).
    pub fn diatonic_pitch_classes(&self) -> Option<[i32; 7]> {
        let tonic = self.tonic_pitch_class();
        self.steps()
            .map(|steps| steps.map(|s| (tonic + s).rem_euclid(12)))
    }

    /// Semitone alteration the key signature applies to each letter, indexed
    /// by [`Letter::step`]. All zero for uninterpreted modes.
    pub fn signature(&self) -> [i32; 7] {
        let mut sig = [0; 7];
        let Some(steps) = self.steps() else {
            return sig;
        };
        let tonic = self.tonic_pitch_class();
        for (degree, step) in steps.iter().enumerate() {
            let letter = Letter::from_step(self.tonic.step() + degree);
            let target = (tonic + step).rem_euclid(12);
            let mut alter = (target - letter.pitch_class()).rem_euclid(12);
            if alter > 6 {
                alter -= 12;
            }
            sig[letter.step()] = alter;
        }
        sig
    }

    /// Parses key text such as `C`, `Am`, `F# minor`, `Bb major` or `D dor`.
    pub fn parse(text: &str) -> Result<Key, String> {
        let text = text.trim();
        let mut chars = text.chars();
        let first = chars
            .next()
            .ok_or_else(|| "key tonic letter".to_string())?;
        let tonic = Letter::from_char(first)
            .filter(|_| first.is_ascii_uppercase())
            .ok_or_else(|| "key tonic letter A-G".to_string())?;
        let rest = chars.as_str();
        let (accidental, rest) = if let Some(r) = rest.strip_prefix('#') {
            (Accidental::Sharp, r)
        } else if let Some(r) = rest.strip_prefix('b') {
            (Accidental::Flat, r)
        } else {
            (Accidental::None, rest)
        };
        let mode_text = rest.trim();
        let mode = match mode_text.to_ascii_lowercase().as_str() {
            "" | "maj" | "major" => Mode::Major,
            "m" | "min" | "minor" => Mode::Minor,
            _ => Mode::Other(mode_text.to_string()),
        };
        Ok(Key::new(tonic, accidental, mode))
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = match self.accidental {
            Accidental::Sharp => "#",
            Accidental::Flat => "b",
            _ => "",
        };
        write!(f, "{}{}", self.tonic.as_char(), acc)?;
        match &self.mode {
            Mode::Major => Ok(()),
            Mode::Minor => f.write_str("m"),
            Mode::Other(m) => write!(f, " {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuneHeader {
    pub reference_number: u32,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composer: Option<String>,
    pub meter: Meter,
    #[serde(with = "ratio::text")]
    pub unit_note_length: Rational,
    pub key: Key,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tempo: Option<String>,
    /// Unrecognized header lines, verbatim and in source order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_fields: Vec<String>,
}

impl TuneHeader {
    pub fn new(meter: Meter, unit_note_length: Rational, key: Key) -> Self {
        TuneHeader {
            reference_number: 1,
            title: String::new(),
            composer: None,
            meter,
            unit_note_length,
            key,
            tempo: None,
            extra_fields: Vec::new(),
        }
    }

    /// Expected length of a full bar in unit-note-lengths.
    pub fn bar_units(&self) -> Rational {
        self.meter.bar_length() / self.unit_note_length
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tune {
    pub header: TuneHeader,
    pub voices: Vec<VoicePart>,
}

impl Tune {
    pub fn voice(&self, voice_id: &str) -> Option<&VoicePart> {
        self.voices.iter().find(|v| v.voice_id == voice_id)
    }

    pub fn bar_units(&self) -> Rational {
        self.header.bar_units()
    }

    /// Largest per-voice bar count.
    pub fn bar_count(&self) -> usize {
        self.voices
            .iter()
            .map(VoicePart::measure_count)
            .max()
            .unwrap_or(0)
    }
}
