mod common;

use common::random_tune;
use composerx::abc::{Accidental, EventKind, Letter, Mode, NoteEvent, Pitch, Tune};
use composerx::analysis::{
    check_bar_durations, check_pitch_ranges, check_voice_alignment, key_adherence, validate, RangeTable,
};
use composerx::prompts::PromptAttributes;
use composerx::ratio::Rational;
use proptest::prelude::*;

fn shift_octaves(tune: &Tune, by: i32) -> Tune {
    let mut t = tune.clone();
    let shift = |p: &mut Pitch| p.octave += by;
    for voice in &mut t.voices {
        for bar in &mut voice.bars {
            for ev in &mut bar.events {
                match &mut ev.kind {
                    EventKind::Note(p) => shift(p),
                    EventKind::Chord(ps) => ps.iter_mut().for_each(shift),
                    _ => {}
                }
            }
        }
    }
    t
}

/// Signature alteration per letter, worked out on the circle of fifths.
fn oracle_signature(tune: &Tune) -> [(char, i32); 7] {
    let key = &tune.header.key;
    let base = match key.tonic {
        Letter::F => -1,
        Letter::C => 0,
        Letter::G => 1,
        Letter::D => 2,
        Letter::A => 3,
        Letter::E => 4,
        Letter::B => 5,
    };
    let acc = match key.accidental {
        Accidental::Sharp => 7,
        Accidental::Flat => -7,
        _ => 0,
    };
    let mut sig = [('C', 0), ('D', 0), ('E', 0), ('F', 0), ('G', 0), ('A', 0), ('B', 0)];
    let fifths: i32 = match key.mode {
        Mode::Major => base + acc,
        Mode::Minor => base + acc - 3,
        Mode::Other(_) => return sig,
    };
    let order: &[char] = if fifths > 0 { &['F', 'C', 'G', 'D', 'A', 'E', 'B'] } else { &['B', 'E', 'A', 'D', 'G', 'C', 'F'] };
    for i in 0..fifths.unsigned_abs() as usize {
        let letter = order[i % 7];
        let slot = sig.iter_mut().find(|(l, _)| *l == letter).unwrap();
        slot.1 += fifths.signum();
    }
    sig
}

/// Sounding MIDI numbers per (voice, bar, event), rescanned from scratch.
fn oracle_sounding(tune: &Tune) -> Vec<(usize, usize, usize, i32)> {
    let sig = oracle_signature(tune);
    let semis = |c: char| match c {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        _ => 11,
    };
    let mut out = Vec::new();
    for (vi, voice) in tune.voices.iter().enumerate() {
        for (bi, bar) in voice.bars.iter().enumerate() {
            let mut carried: Vec<(char, i32, i32)> = Vec::new();
            for (ei, ev) in bar.events.iter().enumerate() {
                for p in ev.pitches() {
                    let letter = p.letter.as_char().to_ascii_uppercase();
                    let alter = match p.accidental {
                        Accidental::None => carried
                            .iter()
                            .rev()
                            .find(|(l, o, _)| *l == letter && *o == p.octave)
                            .map(|c| c.2)
                            .unwrap_or_else(|| sig.iter().find(|(l, _)| *l == letter).unwrap().1),
                        a => {
                            let v = match a {
                                Accidental::Sharp => 1,
                                Accidental::Flat => -1,
                                _ => 0,
                            };
                            carried.push((letter, p.octave, v));
                            v
                        }
                    };
                    out.push((vi, bi, ei, 60 + 12 * p.octave + semis(letter) + alter));
                }
            }
        }
    }
    out
}

/// (root pitch class, quality) of a chord-symbol text.
fn oracle_chord(text: &str) -> Option<(i32, &'static str)> {
    let mut chars = text.trim().chars();
    let root: i32 = match chars.next()? {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = chars.as_str();
    let (shift, rest): (i32, &str) = match rest.chars().next() {
        Some('#') => (1, &rest[1..]),
        Some('b') => (-1, &rest[1..]),
        _ => (0, rest),
    };
    let rest = rest.split('/').next().unwrap();
    let quality = match rest {
        "" | "maj" | "M" => "maj",
        "m" | "min" | "-" => "min",
        "7" => "7",
        "maj7" | "M7" => "maj7",
        "m7" | "min7" => "m7",
        "dim" | "o" => "dim",
        "aug" | "+" => "aug",
        _ => return None,
    };
    Some(((root + shift).rem_euclid(12), quality))
}

const REQUESTABLE: [&str; 8] = ["C", "Am", "G7", "F#m7", "Gbm7", "A#maj7", "Bbmaj7", "Dm"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn octave_shift_keeps_structure(seed in any::<u64>()) {
        let t = random_tune(seed);
        let up = shift_octaves(&t, 1);
        prop_assert_eq!(check_bar_durations(&t), check_bar_durations(&up));
        prop_assert_eq!(check_voice_alignment(&t), check_voice_alignment(&up));
        prop_assert_eq!(key_adherence(&t), key_adherence(&up));
    }

    #[test]
    fn adding_an_event_never_shortens_a_bar(seed in any::<u64>(), pick in any::<prop::sample::Index>(), n in 1i64..8, d in prop::sample::select(vec![1i64, 2, 4])) {
        let t = random_tune(seed);
        let bar_units = t.bar_units();
        let bars: Vec<_> = t.voices.iter().flat_map(|v| v.bars.iter())
            .filter(|b| !b.events.iter().any(|e| matches!(e.kind, EventKind::MultiBarRest(_))))
            .collect();
        prop_assume!(!bars.is_empty());
        let bar = pick.get(&bars);
        let mut longer = (*bar).clone();
        longer.events.push(NoteEvent::note(Pitch::new(Letter::C, Accidental::None, 0), Rational::new(n, d)));
        prop_assert!(longer.units(bar_units) > bar.units(bar_units));
    }

    #[test]
    fn range_check_matches_rescan(seed in any::<u64>()) {
        let t = random_tune(seed);
        let table = RangeTable::default_table();
        let check = check_pitch_ranges(&t, &table);
        let mut expected = Vec::new();
        for (vi, bi, ei, midi) in oracle_sounding(&t) {
            if let Some((_, range)) = table.resolve(&t.voices[vi]) {
                if midi < range.low_midi as i32 || midi > range.high_midi as i32 {
                    expected.push((t.voices[vi].voice_id.clone(), bi, ei, midi));
                }
            }
        }
        let got: Vec<_> = check.violations.iter().map(|v| (v.voice_id.clone(), v.bar_index, v.event_index, v.midi)).collect();
        prop_assert_eq!(got, expected);
        for v in &check.violations {
            prop_assert!(v.midi < v.allowed[0] as i32 || v.midi > v.allowed[1] as i32);
        }
    }

    #[test]
    fn chord_matches_agree_with_brute_force(seed in any::<u64>(), picks in prop::collection::vec(prop::sample::select(REQUESTABLE.to_vec()), 1..5)) {
        let t = random_tune(seed);
        let attrs = PromptAttributes {
            name: "p".into(),
            chord_progression: Some(picks.iter().map(|s| s.to_string()).collect()),
            ..Default::default()
        };
        let report = validate(&t, Some(&attrs), &RangeTable::default_table());
        let cm = report.chord_match.unwrap();

        let mut measures: Vec<Option<&str>> = Vec::new();
        for bar in &t.voices[0].bars {
            let span = bar.events.iter().find_map(|e| match e.kind { EventKind::MultiBarRest(n) => Some(n as usize), _ => None }).unwrap_or(1);
            measures.push(bar.events.iter().find_map(|e| e.chord_symbol.as_deref()));
            measures.extend(std::iter::repeat_n(None, span - 1));
        }
        let expected = measures.iter().enumerate().filter(|(i, m)| {
            let want = oracle_chord(picks[i % picks.len()]);
            m.and_then(oracle_chord).is_some_and(|got| Some(got) == want)
        }).count();
        prop_assert_eq!(cm.matched_positions, expected);
        prop_assert!(cm.matched_positions <= report.bars_found);
    }
}
