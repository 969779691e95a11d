#![allow(dead_code)]

use composerx::abc::{
    Accidental, Bar, EventKind, Key, LeftDelim, Letter, Meter, Mode, NoteEvent, Pitch, RightDelim,
    Tune, TuneHeader, VoicePart,
};
use composerx::ratio::Rational;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const METERS: [(u32, u32); 6] = [(4, 4), (3, 4), (2, 4), (6, 8), (2, 2), (9, 8)];
const UNITS: [(i64, i64); 3] = [(1, 4), (1, 8), (1, 16)];
const SYMBOLS: [&str; 5] = ["C", "Am", "G7", "F#m7", "Bbmaj7"];
const WORDS: [&str; 5] = ["Dawn", "Little Waltz", "Reel", "Night Song", ""];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    *items.choose(rng).expect("nonempty")
}

fn random_pitch(rng: &mut ChaCha8Rng) -> Pitch {
    let letter = pick(rng, &Letter::ALL);
    let accidental = pick(
        rng,
        &[Accidental::None, Accidental::None, Accidental::Sharp, Accidental::Flat, Accidental::Natural],
    );
    Pitch::new(letter, accidental, rng.random_range(-2..=2))
}

fn random_duration(rng: &mut ChaCha8Rng) -> Rational {
    Rational::new(rng.random_range(1..=4), pick(rng, &[1, 1, 2, 4]))
}

fn random_key(rng: &mut ChaCha8Rng) -> Key {
    let tonic = pick(rng, &Letter::ALL);
    let accidental = pick(rng, &[Accidental::None, Accidental::None, Accidental::Sharp, Accidental::Flat]);
    let mode = match rng.random_range(0..4) {
        0 | 1 => Mode::Major,
        2 => Mode::Minor,
        _ => Mode::Other(pick(rng, &["dor", "Mix", "lydian"]).to_string()),
    };
    Key::new(tonic, accidental, mode)
}

fn random_event(rng: &mut ChaCha8Rng) -> NoteEvent {
    let mut ev = match rng.random_range(0..10) {
        0..=5 => NoteEvent::note(random_pitch(rng), random_duration(rng)),
        6 | 7 => {
            let mut pitches: Vec<Pitch> = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                let p = random_pitch(rng);
                if !pitches.contains(&p) {
                    pitches.push(p);
                }
            }
            NoteEvent::new(EventKind::Chord(pitches), random_duration(rng))
        }
        _ => NoteEvent::rest(random_duration(rng)),
    };
    if !ev.is_rest() && rng.random_bool(0.15) {
        ev.tie_to_next = true;
    }
    if rng.random_bool(0.2) {
        ev.chord_symbol = Some(pick(rng, &SYMBOLS).to_string());
    }
    ev
}

fn tuplet_time(size: u8, meter: Meter) -> i64 {
    match size {
        2 | 4 | 8 => 3,
        3 | 6 => 2,
        _ if meter.is_compound() => 3,
        _ => 2,
    }
}

fn random_bar(rng: &mut ChaCha8Rng, meter: Meter, allow_empty: bool) -> Bar {
    let mut bar = Bar::default();
    if rng.random_bool(0.15) {
        bar.events.push(NoteEvent::new(
            EventKind::MultiBarRest(rng.random_range(1..=4)),
            Rational::from_integer(1),
        ));
    } else {
        let min = if allow_empty { 0 } else { 1 };
        let mut remaining = rng.random_range(min..=6);
        while remaining > 0 {
            if remaining >= 2 && rng.random_bool(0.15) {
                let size = rng.random_range(2..=remaining.min(5)) as u8;
                let scale = Rational::new(tuplet_time(size, meter), size as i64);
                for k in 0..size {
                    let mut ev = random_event(rng);
                    ev.tuplet_scale = scale;
                    if k == 0 {
                        ev.tuplet_start = Some(size);
                    }
                    bar.events.push(ev);
                }
                remaining -= size as usize;
            } else {
                bar.events.push(random_event(rng));
                remaining -= 1;
            }
        }
    }
    if rng.random_bool(0.2) {
        bar.left_delim = LeftDelim::RepeatStart;
    }
    bar.right_delim = pick(
        rng,
        &[RightDelim::Plain, RightDelim::Plain, RightDelim::Plain, RightDelim::RepeatEnd, RightDelim::Double, RightDelim::Final],
    );
    bar
}

/// A small tune built directly as a syntax tree, restricted to shapes the
/// parser itself can produce.
pub fn random_tune(seed: u64) -> Tune {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = pick(&mut rng, &METERS);
    let meter = Meter::new(n, d);
    let (un, ud) = pick(&mut rng, &UNITS);
    let mut header = TuneHeader::new(meter, Rational::new(un, ud), random_key(&mut rng));
    header.reference_number = rng.random_range(1..=500);
    header.title = pick(&mut rng, &WORDS).to_string();
    if rng.random_bool(0.5) {
        header.composer = Some("Trad.".to_string());
    }
    if rng.random_bool(0.3) {
        header.tempo = Some("1/4=96".to_string());
    }
    if rng.random_bool(0.3) {
        header.extra_fields = vec!["R:reel".to_string(), "%%score (1 2)".to_string()];
    }
    let voice_count = rng.random_range(1..=3);
    let mut voices = Vec::new();
    for v in 0..voice_count {
        let mut voice = VoicePart::new(pick(&mut rng, &["1", "S", "Bass"]).to_string() + &v.to_string());
        if voice_count == 1 && rng.random_bool(0.5) {
            voice.voice_id = "1".to_string();
        } else {
            if rng.random_bool(0.5) {
                voice.name = Some(pick(&mut rng, &["Violin", "Upright Bass", "Accordion"]).to_string());
            }
            if rng.random_bool(0.3) {
                voice.properties = vec!["clef=bass".to_string()];
            }
            if rng.random_bool(0.6) {
                voice.midi_program = Some(rng.random_range(0..=127));
            }
        }
        for i in 0..rng.random_range(1..=6) {
            voice.bars.push(random_bar(&mut rng, meter, i > 0));
        }
        voices.push(voice);
    }
    Tune { header, voices }
}
