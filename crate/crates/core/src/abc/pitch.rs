use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A natural note name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Letter {
    pub const ALL: [Letter; 7] = [
        Letter::C,
        Letter::D,
        Letter::E,
        Letter::F,
        Letter::G,
        Letter::A,
        Letter::B,
    ];

    /// Case-insensitive conversion from a note letter.
    pub fn from_char(c: char) -> Option<Letter> {
        Some(match c.to_ascii_uppercase() {
            'A' => Letter::A,
            'B' => Letter::B,
            'C' => Letter::C,
            'D' => Letter::D,
            'E' => Letter::E,
            'F' => Letter::F,
            'G' => Letter::G,
            _ => return None,
        })
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'A',
            Letter::B => 'B',
            Letter::C => 'C',
            Letter::D => 'D',
            Letter::E => 'E',
            Letter::F => 'F',
            Letter::G => 'G',
        }
    }

    /// Pitch class of the natural note, C = 0.
    pub fn pitch_class(self) -> i32 {
        match self {
            Letter::C => 0,
            Letter::D => 2,
            Letter::E => 4,
            Letter::F => 5,
            Letter::G => 7,
            Letter::A => 9,
            Letter::B => 11,
        }
    }

    /// Position in the C-based letter cycle (C = 0 .. B = 6).
    pub fn step(self) -> usize {
        match self {
            Letter::C => 0,
            Letter::D => 1,
            Letter::E => 2,
            Letter::F => 3,
            Letter::G => 4,
            Letter::A => 5,
            Letter::B => 6,
        }
    }

    pub fn from_step(step: usize) -> Letter {
        Letter::ALL[step % 7]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accidental {
    Sharp,
    Flat,
    Natural,
    #[default]
    None,
}

impl Accidental {
    /// Semitone shift; `None` and `Natural` are both zero.
    pub fn semitones(self) -> i32 {
        match self {
            Accidental::Sharp => 1,
            Accidental::Flat => -1,
            Accidental::Natural | Accidental::None => 0,
        }
    }

    pub fn abc_prefix(self) -> &'static str {
        match self {
            Accidental::Sharp => "^",
            Accidental::Flat => "_",
            Accidental::Natural => "=",
            Accidental::None => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("pitch {value} is outside the MIDI range 0..=127")]
pub struct RangeError {
    pub value: i32,
}

/// A written pitch. `octave` is relative to the ABC middle octave: uppercase
/// letters are 0, lowercase +1, each `'` adds one and each `,` subtracts one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pitch {
    pub letter: Letter,
    pub accidental: Accidental,
    pub octave: i32,
}

impl Pitch {
    pub fn new(letter: Letter, accidental: Accidental, octave: i32) -> Self {
        Pitch {
            letter,
            accidental,
            octave,
        }
    }

    pub fn natural(letter: Letter, octave: i32) -> Self {
        Pitch::new(letter, Accidental::None, octave)
    }

    /// Unchecked MIDI value as written, ignoring key signature.
    pub fn midi_value(&self) -> i32 {
        60 + 12 * self.octave + self.letter.pitch_class() + self.accidental.semitones()
    }

    pub fn midi_number(&self) -> Result<u8, RangeError> {
        midi_number(self)
    }

    /// Scientific pitch name such as `C4` or `F#2`.
    pub fn scientific_name(&self) -> String {
        let acc = match self.accidental {
            Accidental::Sharp => "#",
            Accidental::Flat => "b",
            _ => "",
        };
        format!("{}{}{}", self.letter.as_char(), acc, self.octave + 4)
    }

    /// Parses a scientific pitch name (`C2`, `F#4`, `Bb3`, `C-1`).
    pub fn from_scientific(text: &str) -> Option<Pitch> {
        let mut chars = text.chars();
        let letter = Letter::from_char(chars.next()?)?;
        if !text.starts_with(|c: char| c.is_ascii_uppercase()) {
            return None;
        }
        let rest = chars.as_str();
        let (accidental, rest) = if let Some(r) = rest.strip_prefix('#') {
            (Accidental::Sharp, r)
        } else if let Some(r) = rest.strip_prefix('b') {
            (Accidental::Flat, r)
        } else {
            (Accidental::None, rest)
        };
        let octave: i32 = rest.parse().ok()?;
        Some(Pitch::new(letter, accidental, octave - 4))
    }
}

/// MIDI note number of a written pitch; uppercase `C` is 60.
pub fn midi_number(pitch: &Pitch) -> Result<u8, RangeError> {
    let value = pitch.midi_value();
    if (0..=127).contains(&value) {
        Ok(value as u8)
    } else {
        Err(RangeError { value })
    }
}

impl fmt::Display for Pitch {
    /// ABC spelling of the pitch.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.accidental.abc_prefix())?;
        if self.octave >= 1 {
            write!(f, "{}", self.letter.as_char().to_ascii_lowercase())?;
            for _ in 1..self.octave {
                f.write_str("'")?;
            }
        } else {
            write!(f, "{}", self.letter.as_char())?;
            for _ in self.octave..0 {
                f.write_str(",")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn middle_c_and_octaves() {
        assert_eq!(midi_number(&Pitch::natural(Letter::C, 0)), Ok(60));
        assert_eq!(midi_number(&Pitch::natural(Letter::C, 1)), Ok(72));
        assert_eq!(midi_number(&Pitch::natural(Letter::C, -2)), Ok(36));
    }

    #[test]
    fn accidentals_shift_by_one() {
        assert_eq!(Pitch::new(Letter::F, Accidental::Sharp, 0).midi_value(), 66);
        assert_eq!(Pitch::new(Letter::B, Accidental::Flat, 0).midi_value(), 70);
        assert_eq!(Pitch::new(Letter::E, Accidental::Natural, 0).midi_value(), 64);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let low = Pitch::natural(Letter::C, -6);
        assert_eq!(midi_number(&low), Err(RangeError { value: -12 }));
        let high = Pitch::natural(Letter::A, 6);
        assert!(midi_number(&high).is_err());
    }

    #[test]
    fn scientific_names() {
        let c2 = Pitch::from_scientific("C2").unwrap();
        assert_eq!(c2.midi_value(), 36);
        assert_eq!(Pitch::from_scientific("F4").unwrap().midi_value(), 65);
        assert_eq!(Pitch::from_scientific("F#2").unwrap().midi_value(), 42);
        assert_eq!(Pitch::from_scientific("Bb3").unwrap().midi_value(), 58);
        assert_eq!(Pitch::from_scientific("A0").unwrap().midi_value(), 21);
        assert_eq!(Pitch::from_scientific("C-1").unwrap().midi_value(), 0);
        assert!(Pitch::from_scientific("c4").is_none());
        assert!(Pitch::from_scientific("H4").is_none());
        assert_eq!(c2.scientific_name(), "C2");
    }

    #[test]
    fn abc_spelling() {
        assert_eq!(Pitch::natural(Letter::C, -2).to_string(), "C,,");
        assert_eq!(Pitch::natural(Letter::C, 2).to_string(), "c'");
        assert_eq!(Pitch::new(Letter::F, Accidental::Sharp, 1).to_string(), "^f");
    }
}
