use std::collections::{BTreeMap, HashMap};

use log::warn;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::ranges::RangeTable;
use crate::abc::{Accidental, Key, Letter, Pitch, RightDelim, Tune};
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Short,
    Long,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarAnomaly {
    pub voice_id: String,
    pub bar_index: usize,
    #[serde(with = "ratio::text")]
    pub expected_units: Rational,
    #[serde(with = "ratio::text")]
    pub actual_units: Rational,
    pub kind: AnomalyKind,
    /// Short pickup or closing bar accepted as anacrusis.
    pub tolerated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub aligned: bool,
    pub per_voice_bar_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeViolation {
    pub voice_id: String,
    pub bar_index: usize,
    pub event_index: usize,
    pub midi: i32,
    pub allowed: [u8; 2],
    pub instrument: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeCheck {
    pub violations: Vec<RangeViolation>,
    /// Voices with no range entry; they were not checked.
    pub unresolved_voices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyReport {
    /// False for modes other than major and minor; counts are then zero.
    pub applicable: bool,
    pub out_of_key_count: usize,
    pub total_pitched: usize,
}

/// MIDI values actually sounding for one event after the key signature and
/// accidentals carried through the bar are applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundingEvent {
    pub voice_index: usize,
    pub bar_index: usize,
    pub event_index: usize,
    pub midi: Vec<i32>,
}

/// Applies the key signature and in-bar accidentals to a written pitch.
struct BarSpelling {
    signature: [i32; 7],
    carried: HashMap<(Letter, i32), i32>,
}

impl BarSpelling {
    fn new(key: &Key) -> Self {
        BarSpelling {
            signature: key.signature(),
            carried: HashMap::new(),
        }
    }

    fn reset(&mut self) {
        self.carried.clear();
    }

    fn sound(&mut self, p: &Pitch) -> i32 {
        let alter = if p.accidental != Accidental::None {
            let a = p.accidental.semitones();
            self.carried.insert((p.letter, p.octave), a);
            a
        } else {
            self.carried
                .get(&(p.letter, p.octave))
                .copied()
                .unwrap_or(self.signature[p.letter.step()])
        };
        60 + 12 * p.octave + p.letter.pitch_class() + alter
    }
}

/// Sounding MIDI values of every pitched event, in voice, bar and event order.
pub fn sounding_events(tune: &Tune) -> Vec<SoundingEvent> {
    let mut out = Vec::new();
    for (vi, voice) in tune.voices.iter().enumerate() {
        let mut spelling = BarSpelling::new(&tune.header.key);
        for (bi, bar) in voice.bars.iter().enumerate() {
            spelling.reset();
            for (ei, ev) in bar.events.iter().enumerate() {
                let pitches = ev.pitches();
                if pitches.is_empty() {
                    continue;
                }
                out.push(SoundingEvent {
                    voice_index: vi,
                    bar_index: bi,
                    event_index: ei,
                    midi: pitches.iter().map(|p| spelling.sound(p)).collect(),
                });
            }
        }
    }
    out
}

/// Compares each bar's length against the meter.
pub fn check_bar_durations(tune: &Tune) -> Vec<BarAnomaly> {
    let bar_units = tune.bar_units();
    let mut out = Vec::new();
    for voice in &tune.voices {
        for (i, bar) in voice.bars.iter().enumerate() {
            let expected = bar_units * Rational::from_integer(bar.span() as i64);
            let actual = bar.units(bar_units);
            let kind = if bar.events.is_empty() {
                AnomalyKind::Empty
            } else if actual < expected {
                AnomalyKind::Short
            } else if actual > expected {
                AnomalyKind::Long
            } else {
                continue;
            };
            let tolerated = kind == AnomalyKind::Short
                && (i == 0 || matches!(bar.right_delim, RightDelim::RepeatEnd | RightDelim::Final));
            out.push(BarAnomaly {
                voice_id: voice.voice_id.clone(),
                bar_index: i,
                expected_units: expected,
                actual_units: actual,
                kind,
                tolerated,
            });
        }
    }
    out
}

/// Length of every measure of every voice, with multi-bar rests expanded.
fn measure_lengths(tune: &Tune) -> Vec<Vec<Rational>> {
    let bar_units = tune.bar_units();
    tune.voices
        .iter()
        .map(|voice| {
            let mut lengths = Vec::new();
            for bar in &voice.bars {
                match bar.span() {
                    1 => lengths.push(bar.units(bar_units)),
                    n => lengths.extend(std::iter::repeat_n(bar_units, n as usize)),
                }
            }
            lengths
        })
        .collect()
}

pub fn check_voice_alignment(tune: &Tune) -> AlignmentReport {
    let lengths = measure_lengths(tune);
    let aligned = lengths.windows(2).all(|w| w[0] == w[1]);
    let per_voice_bar_counts = tune
        .voices
        .iter()
        .zip(&lengths)
        .map(|(v, l)| (v.voice_id.clone(), l.len()))
        .collect();
    AlignmentReport {
        aligned,
        per_voice_bar_counts,
    }
}

pub fn check_pitch_ranges(tune: &Tune, ranges: &RangeTable) -> RangeCheck {
    let mut check = RangeCheck::default();
    let resolved: Vec<_> = tune.voices.iter().map(|v| ranges.resolve(v)).collect();
    for (voice, r) in tune.voices.iter().zip(&resolved) {
        if r.is_none() {
            warn!("no pitch range for voice {:?}; skipping range check", voice.voice_id);
            check.unresolved_voices.push(voice.voice_id.clone());
        }
    }
    for ev in sounding_events(tune) {
        let Some((instrument, range)) = &resolved[ev.voice_index] else {
            continue;
        };
        for &midi in &ev.midi {
            if !range.contains(midi) {
                check.violations.push(RangeViolation {
                    voice_id: tune.voices[ev.voice_index].voice_id.clone(),
                    bar_index: ev.bar_index,
                    event_index: ev.event_index,
                    midi,
                    allowed: [range.low_midi, range.high_midi],
                    instrument: instrument.clone(),
                });
            }
        }
    }
    check
}

/// Counts sounding pitches outside the diatonic set of the header key.
pub fn key_adherence(tune: &Tune) -> KeyReport {
    let Some(scale) = tune.header.key.diatonic_pitch_classes() else {
        return KeyReport {
            applicable: false,
            out_of_key_count: 0,
            total_pitched: 0,
        };
    };
    let mut total = 0;
    let mut outside = 0;
    for ev in sounding_events(tune) {
        for midi in ev.midi {
            total += 1;
            if !scale.contains(&midi.rem_euclid(12)) {
                outside += 1;
            }
        }
    }
    KeyReport {
        applicable: true,
        out_of_key_count: outside,
        total_pitched: total,
    }
}

pub(crate) fn median(values: &mut [Rational]) -> Rational {
    if values.is_empty() {
        return Rational::zero();
    }
    values.sort();
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / Rational::from_integer(2)
    }
}
