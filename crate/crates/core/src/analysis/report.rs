use std::fmt;

use serde::{Deserialize, Serialize};

use super::checks::{
    check_bar_durations, check_pitch_ranges, check_voice_alignment, key_adherence, median,
    sounding_events, AlignmentReport, BarAnomaly, KeyReport, RangeViolation,
};
use super::chords::{
    closing_symbols_by_measure, extract_chord_progression, normalize_symbol, symbols_match,
    ChordSymbol,
};
use super::ranges::RangeTable;
use crate::abc::{Key, Mode, Tune};
use crate::prompts::PromptAttributes;
use crate::ratio::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordMatch {
    /// Requested progression repeated cyclically to cover the piece.
    pub requested: Vec<String>,
    pub extracted: Vec<Option<String>>,
    pub matched_positions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEnding {
    pub voice_id: String,
    pub bar_index: usize,
    pub event_index: usize,
    /// Scientific name of the sounding pitch (top note of a chord).
    pub ending_pitch: String,
    pub midi: i32,
    pub in_key_or_chord: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub bar_anomalies: Vec<BarAnomaly>,
    pub alignment: AlignmentReport,
    pub range_violations: Vec<RangeViolation>,
    #[serde(default)]
    pub unresolved_voices: Vec<String>,
    pub key_report: KeyReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chord_match: Option<ChordMatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_requested: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_match: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bars_requested: Option<u32>,
    pub bars_found: usize,
    pub phrase_endings: Vec<PhraseEnding>,
}

impl ValidationReport {
    /// Anomalies that are not accepted as anacrusis.
    pub fn hard_anomalies(&self) -> impl Iterator<Item = &BarAnomaly> {
        self.bar_anomalies.iter().filter(|a| !a.tolerated)
    }

    /// Untolerated bar anomalies, range violations or misaligned voices.
    pub fn has_problems(&self) -> bool {
        self.hard_anomalies().next().is_some()
            || !self.range_violations.is_empty()
            || !self.alignment.aligned
    }

    pub fn bar_count_match(&self) -> Option<bool> {
        self.bars_requested.map(|b| b as usize == self.bars_found)
    }

    /// matched_positions / bars_found, when a progression was requested.
    pub fn chord_match_fraction(&self) -> Option<f64> {
        let cm = self.chord_match.as_ref()?;
        if self.bars_found == 0 {
            return Some(0.0);
        }
        Some(cm.matched_positions as f64 / self.bars_found as f64)
    }
}

/// Requested key text such as `C major`, `Am` or `F# minor`.
pub fn parse_requested_key(text: &str) -> Option<Key> {
    let cleaned = text
        .trim()
        .replace(" flat", "b")
        .replace(" sharp", "#")
        .replace('♭', "b")
        .replace('♯', "#");
    Key::parse(&cleaned).ok()
}

/// Same tonic pitch class and mode.
pub fn keys_equivalent(a: &Key, b: &Key) -> bool {
    let mode_eq = match (&a.mode, &b.mode) {
        (Mode::Other(x), Mode::Other(y)) => x.eq_ignore_ascii_case(y),
        (x, y) => x == y,
    };
    a.tonic_pitch_class() == b.tonic_pitch_class() && mode_eq
}

fn chord_match(requested: &[String], tune: &Tune) -> ChordMatch {
    let extracted = extract_chord_progression(tune);
    let len = requested.len().max(extracted.len());
    let requested: Vec<String> = requested
        .iter()
        .cycle()
        .take(len)
        .map(|s| normalize_symbol(s))
        .collect();
    let matched_positions = requested
        .iter()
        .zip(&extracted)
        .filter(|(r, e)| e.as_deref().is_some_and(|e| symbols_match(r, e)))
        .count();
    ChordMatch {
        requested,
        extracted,
        matched_positions,
    }
}

fn phrase_endings(tune: &Tune) -> Vec<PhraseEnding> {
    let bar_units = tune.bar_units();
    let scale = tune.header.key.diatonic_pitch_classes();
    let closing = closing_symbols_by_measure(tune);
    let sounding = sounding_events(tune);
    let mut out = Vec::new();
    for (vi, voice) in tune.voices.iter().enumerate() {
        let flat: Vec<(usize, usize)> = voice
            .bars
            .iter()
            .enumerate()
            .flat_map(|(bi, bar)| (0..bar.events.len()).map(move |ei| (bi, ei)))
            .collect();
        let mut measure_of_bar = Vec::with_capacity(voice.bars.len());
        let mut m = 0;
        for bar in &voice.bars {
            measure_of_bar.push(m);
            m += bar.span() as usize;
        }
        let medians: Vec<Rational> = voice
            .bars
            .iter()
            .map(|bar| {
                let mut units: Vec<Rational> = bar.events.iter().map(|e| e.units(bar_units)).collect();
                median(&mut units)
            })
            .collect();
        let mut own_symbol: Option<String> = None;
        for (k, &(bi, ei)) in flat.iter().enumerate() {
            let ev = &voice.bars[bi].events[ei];
            if let Some(sym) = &ev.chord_symbol {
                own_symbol = Some(sym.clone());
            }
            if ev.pitches().is_empty() {
                continue;
            }
            let long = ev.units(bar_units) >= medians[bi] * Rational::from_integer(2);
            let before_rest = flat
                .get(k + 1)
                .is_some_and(|&(nb, ne)| voice.bars[nb].events[ne].is_rest());
            if !long && !before_rest {
                continue;
            }
            let Some(midi) = sounding
                .iter()
                .find(|s| s.voice_index == vi && s.bar_index == bi && s.event_index == ei)
                .and_then(|s| s.midi.iter().copied().max())
            else {
                continue;
            };
            let pc = midi.rem_euclid(12);
            let in_key = scale.is_some_and(|s| s.contains(&pc));
            let symbol = own_symbol
                .clone()
                .or_else(|| closing.get(measure_of_bar[bi]).cloned().flatten());
            let in_chord = symbol
                .as_deref()
                .and_then(ChordSymbol::parse)
                .and_then(|c| c.tone_pitch_classes())
                .is_some_and(|tones| tones.contains(&pc));
            out.push(PhraseEnding {
                voice_id: voice.voice_id.clone(),
                bar_index: bi,
                event_index: ei,
                ending_pitch: scientific(midi),
                midi,
                in_key_or_chord: in_key || in_chord,
            });
        }
    }
    out
}

fn scientific(midi: i32) -> String {
    const NAMES: [&str; 12] = ["C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"];
    format!("{}{}", NAMES[midi.rem_euclid(12) as usize], midi.div_euclid(12) - 1)
}

/// Runs every structural check, plus attribute comparisons when given.
pub fn validate(tune: &Tune, attrs: Option<&PromptAttributes>, ranges: &RangeTable) -> ValidationReport {
    let ranges_check = check_pitch_ranges(tune, ranges);
    let mut report = ValidationReport {
        bar_anomalies: check_bar_durations(tune),
        alignment: check_voice_alignment(tune),
        range_violations: ranges_check.violations,
        unresolved_voices: ranges_check.unresolved_voices,
        key_report: key_adherence(tune),
        chord_match: None,
        key_requested: None,
        key_match: None,
        bars_requested: None,
        bars_found: tune.bar_count(),
        phrase_endings: phrase_endings(tune),
    };
    if let Some(attrs) = attrs {
        if let Some(key) = &attrs.key {
            report.key_requested = Some(key.clone());
            report.key_match =
                Some(parse_requested_key(key).is_some_and(|k| keys_equivalent(&k, &tune.header.key)));
        }
        report.bars_requested = attrs.bars;
        if let Some(prog) = attrs.chord_progression.as_deref().filter(|p| !p.is_empty()) {
            report.chord_match = Some(chord_match(prog, tune));
        }
    }
    report
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bars found        {}", self.bars_found)?;
        if let Some(b) = self.bars_requested {
            writeln!(f, "bars requested    {b}")?;
        }
        if let (Some(k), Some(m)) = (&self.key_requested, self.key_match) {
            writeln!(f, "key requested     {k} ({})", if m { "match" } else { "mismatch" })?;
        }
        let counts: Vec<String> = self
            .alignment
            .per_voice_bar_counts
            .iter()
            .map(|(v, n)| format!("{v}:{n}"))
            .collect();
        writeln!(
            f,
            "aligned           {} [{}]",
            self.alignment.aligned,
            counts.join(" ")
        )?;
        if self.key_report.applicable {
            writeln!(
                f,
                "out of key        {}/{}",
                self.key_report.out_of_key_count, self.key_report.total_pitched
            )?;
        } else {
            writeln!(f, "out of key        n/a (mode not interpreted)")?;
        }
        if let Some(cm) = &self.chord_match {
            writeln!(f, "chords matched    {}/{}", cm.matched_positions, cm.extracted.len())?;
        }
        for a in &self.bar_anomalies {
            writeln!(
                f,
                "bar anomaly       voice {} bar {}: {:?} {} of {} units{}",
                a.voice_id,
                a.bar_index + 1,
                a.kind,
                a.actual_units,
                a.expected_units,
                if a.tolerated { " (tolerated)" } else { "" }
            )?;
        }
        for v in &self.range_violations {
            writeln!(
                f,
                "range violation   voice {} bar {} event {}: midi {} outside [{}, {}] ({})",
                v.voice_id,
                v.bar_index + 1,
                v.event_index + 1,
                v.midi,
                v.allowed[0],
                v.allowed[1],
                v.instrument
            )?;
        }
        for v in &self.unresolved_voices {
            writeln!(f, "unchecked range   voice {v} (no instrument range)")?;
        }
        let weak = self.phrase_endings.iter().filter(|p| !p.in_key_or_chord).count();
        writeln!(
            f,
            "phrase endings    {} ({} outside key and chord)",
            self.phrase_endings.len(),
            weak
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::parse_tune;

    #[test]
    fn requested_keys() {
        let c = Key::parse("C").unwrap();
        assert!(keys_equivalent(&parse_requested_key("C major").unwrap(), &c));
        assert!(keys_equivalent(&parse_requested_key("B flat major").unwrap(), &Key::parse("A#").unwrap()));
        assert!(!keys_equivalent(&parse_requested_key("A minor").unwrap(), &c));
        assert!(parse_requested_key("").is_none());
    }

    #[test]
    fn no_attributes() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC8|").unwrap();
        let r = validate(&tune, None, &RangeTable::default_table());
        assert!(r.chord_match.is_none());
        assert!(r.bars_requested.is_none());
        assert_eq!(r.bars_found, 1);
        assert!(r.alignment.aligned);
    }

    #[test]
    fn phrase_ending_on_chord_tone() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n\"C\"GF ED E4|").unwrap();
        let r = validate(&tune, None, &RangeTable::default_table());
        assert_eq!(r.phrase_endings.len(), 1);
        let p = &r.phrase_endings[0];
        assert_eq!(p.ending_pitch, "E4");
        assert!(p.in_key_or_chord);
    }

    #[test]
    fn ending_before_rest_outside_key_and_chord() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n\"C\"CD E^F z4|").unwrap();
        let r = validate(&tune, None, &RangeTable::default_table());
        let p = r.phrase_endings.iter().find(|p| p.event_index == 3).unwrap();
        assert_eq!(p.midi, 66);
        assert!(!p.in_key_or_chord);
    }

    #[test]
    fn cyclic_progression() {
        let tune = parse_tune(
            "X:1\nT:t\nM:4/4\nL:1/4\nK:C\n\"C\"C4|\"Am\"A4|\"Dm\"D4|\"G\"G4|\"C\"C4|\"Am\"A4|\"Dm\"D4|\"G7\"G4|",
        )
        .unwrap();
        let attrs = PromptAttributes {
            chord_progression: Some(vec!["C".into(), "Am".into(), "Dm".into(), "G".into()]),
            ..Default::default()
        };
        let r = validate(&tune, Some(&attrs), &RangeTable::default_table());
        let cm = r.chord_match.unwrap();
        assert_eq!(cm.requested.len(), 8);
        assert_eq!(cm.matched_positions, 7);
    }

    #[test]
    fn json_round_trip() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nV:1 name=Contrabass\nG8|C2|").unwrap();
        let r = validate(&tune, None, &RangeTable::default_table());
        let text = serde_json::to_string(&r).unwrap();
        let back: ValidationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(r.has_problems());
        assert!(r.to_string().contains("range violation"));
    }
}
