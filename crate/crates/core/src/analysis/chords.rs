use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abc::{Accidental, Letter, Tune};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChordQuality {
    Major,
    Minor,
    Dominant7,
    Major7,
    Minor7,
    Diminished,
    Augmented,
    /// Unrecognized suffix, kept as written.
    Other(String),
}

impl ChordQuality {
    fn from_suffix(s: &str) -> ChordQuality {
        match s {
            "" | "maj" | "M" | "major" => ChordQuality::Major,
            "m" | "min" | "-" | "minor" => ChordQuality::Minor,
            "7" | "dom7" => ChordQuality::Dominant7,
            "maj7" | "M7" | "Maj7" => ChordQuality::Major7,
            "m7" | "min7" | "-7" => ChordQuality::Minor7,
            "dim" | "o" | "°" => ChordQuality::Diminished,
            "aug" | "+" => ChordQuality::Augmented,
            other => ChordQuality::Other(other.to_string()),
        }
    }

    pub fn suffix(&self) -> &str {
        match self {
            ChordQuality::Major => "",
            ChordQuality::Minor => "m",
            ChordQuality::Dominant7 => "7",
            ChordQuality::Major7 => "maj7",
            ChordQuality::Minor7 => "m7",
            ChordQuality::Diminished => "dim",
            ChordQuality::Augmented => "aug",
            ChordQuality::Other(s) => s,
        }
    }

    /// Semitone offsets of the chord tones above the root.
    pub fn intervals(&self) -> Option<&'static [i32]> {
        Some(match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Major7 => &[0, 4, 7, 11],
            ChordQuality::Minor7 => &[0, 3, 7, 10],
            ChordQuality::Diminished => &[0, 3, 6],
            ChordQuality::Augmented => &[0, 4, 8],
            ChordQuality::Other(_) => return None,
        })
    }
}

/// A chord symbol such as `Am`, `F#m7` or `C/G`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordSymbol {
    pub root: Letter,
    pub accidental: Accidental,
    pub quality: ChordQuality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bass: Option<String>,
}

impl ChordSymbol {
    /// None when the text does not start with a root letter A-G.
    pub fn parse(text: &str) -> Option<ChordSymbol> {
        let text = text.trim();
        let mut chars = text.chars();
        let first = chars.next()?;
        if !first.is_ascii_uppercase() {
            return None;
        }
        let root = Letter::from_char(first)?;
        let rest = chars.as_str();
        let (accidental, rest) = if let Some(r) = rest.strip_prefix('#') {
            (Accidental::Sharp, r)
        } else if let Some(r) = rest.strip_prefix('b') {
            (Accidental::Flat, r)
        } else {
            (Accidental::None, rest)
        };
        let (suffix, bass) = match rest.split_once('/') {
            Some((q, b)) => (q, Some(b.trim().to_string())),
            None => (rest, None),
        };
        Some(ChordSymbol {
            root,
            accidental,
            quality: ChordQuality::from_suffix(suffix.trim()),
            bass,
        })
    }

    pub fn root_pitch_class(&self) -> i32 {
        (self.root.pitch_class() + self.accidental.semitones()).rem_euclid(12)
    }

    pub fn is_flagged(&self) -> bool {
        matches!(self.quality, ChordQuality::Other(_))
    }

    /// Same root pitch class and quality; the bass note is ignored.
    pub fn matches(&self, other: &ChordSymbol) -> bool {
        self.root_pitch_class() == other.root_pitch_class() && self.quality == other.quality
    }

    pub fn tone_pitch_classes(&self) -> Option<Vec<i32>> {
        let root = self.root_pitch_class();
        self.quality
            .intervals()
            .map(|iv| iv.iter().map(|i| (root + i).rem_euclid(12)).collect())
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = match self.accidental {
            Accidental::Sharp => "#",
            Accidental::Flat => "b",
            _ => "",
        };
        write!(f, "{}{}{}", self.root.as_char(), acc, self.quality.suffix())?;
        if let Some(b) = &self.bass {
            write!(f, "/{b}")?;
        }
        Ok(())
    }
}

/// Normalized form used in reports; unparseable text is returned trimmed.
pub fn normalize_symbol(text: &str) -> String {
    ChordSymbol::parse(text)
        .map(|c| c.to_string())
        .unwrap_or_else(|| text.trim().to_string())
}

/// Whether two symbol texts name the same chord.
pub fn symbols_match(a: &str, b: &str) -> bool {
    match (ChordSymbol::parse(a), ChordSymbol::parse(b)) {
        (Some(x), Some(y)) => x.matches(&y),
        _ => false,
    }
}

/// First chord symbol of every measure of the first voice, `None` for
/// measures without one. Multi-bar rests contribute one `None` per measure.
pub fn extract_chord_progression(tune: &Tune) -> Vec<Option<String>> {
    let Some(voice) = tune.voices.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for bar in &voice.bars {
        let first = bar
            .events
            .iter()
            .find_map(|e| e.chord_symbol.as_deref())
            .map(normalize_symbol);
        out.push(first);
        out.extend(std::iter::repeat_n(None, bar.span() as usize - 1));
    }
    out
}

/// Chord symbol in force at the end of each measure of the first voice:
/// the latest symbol written so far, carried across measures.
pub(crate) fn closing_symbols_by_measure(tune: &Tune) -> Vec<Option<String>> {
    let Some(voice) = tune.voices.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut current: Option<String> = None;
    for bar in &voice.bars {
        if let Some(last) = bar.events.iter().rev().find_map(|e| e.chord_symbol.clone()) {
            current = Some(last);
        }
        out.extend(std::iter::repeat_n(current.clone(), bar.span() as usize));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::parse_tune;

    #[test]
    fn normalization() {
        assert_eq!(normalize_symbol("C"), "C");
        assert_eq!(normalize_symbol("Amin"), "Am");
        assert_eq!(normalize_symbol("Bbmaj7"), "Bbmaj7");
        assert_eq!(normalize_symbol("F#-7"), "F#m7");
        assert_eq!(normalize_symbol("Gsus4"), "Gsus4");
        assert!(ChordSymbol::parse("Gsus4").unwrap().is_flagged());
        assert_eq!(normalize_symbol("N.C."), "N.C.");
    }

    #[test]
    fn matching_ignores_spelling_and_bass() {
        assert!(symbols_match("C#m", "Dbmin"));
        assert!(symbols_match("C/G", "C"));
        assert!(!symbols_match("C", "Cm"));
        assert!(!symbols_match("N.C.", "N.C."));
    }

    #[test]
    fn progression_per_bar() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/4\nK:C\n\"C\"C4|\"Am\"A4|\"Dm\"D4|\"G\"G4|").unwrap();
        let prog = extract_chord_progression(&tune);
        assert_eq!(prog, vec![Some("C".into()), Some("Am".into()), Some("Dm".into()), Some("G".into())]);
    }

    #[test]
    fn first_symbol_wins() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/4\nK:C\n\"Cmaj7\"C2 \"F\"F2|").unwrap();
        assert_eq!(extract_chord_progression(&tune), vec![Some("Cmaj7".into())]);
    }

    #[test]
    fn unannotated_tune() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/4\nK:C\nC4|D4|Z2|").unwrap();
        assert_eq!(extract_chord_progression(&tune), vec![None; 4]);
    }

    #[test]
    fn closing_symbols_carry_forward() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/4\nK:C\n\"C\"C2 \"G\"G2|D4|\"F\"F4|").unwrap();
        assert_eq!(
            closing_symbols_by_measure(&tune),
            vec![Some("G".into()), Some("G".into()), Some("F".into())]
        );
    }

    #[test]
    fn chord_tones() {
        let c = ChordSymbol::parse("C").unwrap();
        assert_eq!(c.tone_pitch_classes().unwrap(), vec![0, 4, 7]);
        let bdim = ChordSymbol::parse("Bdim").unwrap();
        assert_eq!(bdim.tone_pitch_classes().unwrap(), vec![11, 2, 5]);
    }
}
