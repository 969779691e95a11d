use std::fmt::Write;

use num_traits::One;

use super::ast::{EventKind, LeftDelim, NoteEvent, Tune, VoicePart};
use crate::ratio::Rational;

const BARS_PER_LINE: usize = 4;

/// Canonical ABC text for a tune. Re-parsing the output yields an equal tune.
pub fn serialize_tune(tune: &Tune) -> String {
    let h = &tune.header;
    let mut out = String::new();
    let _ = writeln!(out, "X:{}", h.reference_number);
    let _ = writeln!(out, "T:{}", h.title);
    if let Some(c) = &h.composer {
        let _ = writeln!(out, "C:{c}");
    }
    let _ = writeln!(out, "M:{}", h.meter);
    let _ = writeln!(out, "L:{}", duration_text(&h.unit_note_length, true));
    if let Some(q) = &h.tempo {
        let _ = writeln!(out, "Q:{q}");
    }
    for extra in &h.extra_fields {
        let _ = writeln!(out, "{extra}");
    }
    let _ = writeln!(out, "K:{}", h.key);

    let implicit = matches!(tune.voices.as_slice(), [v] if v.voice_id == "1"
        && v.name.is_none()
        && v.properties.is_empty()
        && v.midi_program.is_none());
    for voice in &tune.voices {
        if !implicit {
            write_voice_header(&mut out, voice);
        }
        write_bars(&mut out, voice);
    }
    out
}

fn write_voice_header(out: &mut String, voice: &VoicePart) {
    out.push_str("V:");
    out.push_str(&voice.voice_id);
    if let Some(name) = &voice.name {
        let _ = write!(out, " name=\"{name}\"");
    }
    for prop in &voice.properties {
        out.push(' ');
        out.push_str(prop);
    }
    out.push('\n');
    if let Some(p) = voice.midi_program {
        let _ = writeln!(out, "%%MIDI program {p}");
    }
}

fn write_bars(out: &mut String, voice: &VoicePart) {
    for (i, bar) in voice.bars.iter().enumerate() {
        if i > 0 {
            out.push(if i % BARS_PER_LINE == 0 { '\n' } else { ' ' });
        }
        if bar.left_delim == LeftDelim::RepeatStart {
            out.push_str("|:");
        }
        for (j, ev) in bar.events.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write_event(out, ev);
        }
        out.push_str(bar.right_delim.as_abc());
    }
    if !voice.bars.is_empty() {
        out.push('\n');
    }
}

fn write_event(out: &mut String, ev: &NoteEvent) {
    if let Some(p) = ev.tuplet_start {
        let _ = write!(out, "({p}");
    }
    if let Some(sym) = &ev.chord_symbol {
        let _ = write!(out, "\"{sym}\"");
    }
    match &ev.kind {
        EventKind::Note(p) => {
            let _ = write!(out, "{p}");
        }
        EventKind::Chord(ps) => {
            out.push('[');
            for p in ps {
                let _ = write!(out, "{p}");
            }
            out.push(']');
        }
        EventKind::Rest => out.push('z'),
        EventKind::MultiBarRest(n) => {
            out.push('Z');
            if *n != 1 {
                let _ = write!(out, "{n}");
            }
        }
    }
    if !matches!(ev.kind, EventKind::MultiBarRest(_)) {
        out.push_str(&duration_text(&ev.duration, false));
    }
    if ev.tie_to_next {
        out.push('-');
    }
}

/// `1` is empty in note context, halves are `/`, other fractions `n/d`.
fn duration_text(d: &Rational, explicit_one: bool) -> String {
    let (n, den) = (*d.numer(), *d.denom());
    if d.is_one() && !explicit_one {
        String::new()
    } else if den == 1 {
        n.to_string()
    } else if explicit_one {
        format!("{n}/{den}")
    } else if n == 1 && den == 2 {
        "/".to_string()
    } else if n == 1 {
        format!("/{den}")
    } else {
        format!("{n}/{den}")
    }
}
