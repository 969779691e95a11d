//! Score checks over parsed tunes: bar durations, voice alignment, pitch
//! ranges, key adherence, chord extraction and prompt adherence.

mod checks;
mod chords;
mod ranges;
mod report;

pub use checks::{
    check_bar_durations, check_pitch_ranges, check_voice_alignment, key_adherence,
    sounding_events, AlignmentReport, AnomalyKind, BarAnomaly, KeyReport, RangeCheck, RangeViolation,
    SoundingEvent,
};
pub use chords::{extract_chord_progression, normalize_symbol, symbols_match, ChordQuality, ChordSymbol};
pub use ranges::{canonical_name, InstrumentRange, RangeTable, RangeTableError};
pub use report::{
    keys_equivalent, parse_requested_key, validate, ChordMatch, PhraseEnding, ValidationReport,
};
