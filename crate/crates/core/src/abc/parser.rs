//! Parser for the supported ABC subset.
//!
//! Headers: `X T C M L K Q V` plus `%%MIDI program`. Body: notes with `^ _ =`
//! accidentals, `'` and `,` octave marks, durations `n`, `/`, `/n`, `n/m`,
//! rests `z` and `Z`, bar lines `| |: :| || |] ::`, bracket chords, quoted
//! chord symbols, ties and `(n` tuplets. Anything else in the body is an
//! error rather than being skipped, so that duration checks downstream are
//! never computed over silently dropped material.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{
    Bar, EventKind, Key, LeftDelim, Meter, NoteEvent, RightDelim, Tune, TuneHeader, VoicePart,
};
use super::pitch::{Accidental, Letter, Pitch};
use crate::ratio::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}, column {column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    fn new(line: usize, column: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            expected: expected.into(),
            found: found.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTune {
    pub tune: Tune,
    pub warnings: Vec<ParseWarning>,
}

pub fn parse_tune(text: &str) -> Result<Tune, ParseError> {
    parse_tune_with_warnings(text).map(|p| p.tune)
}

pub fn parse_tune_with_warnings(text: &str) -> Result<ParsedTune, ParseError> {
    let mut parser = Parser::default();
    let mut last_line = 0;
    for (idx, raw) in text.split('\n').enumerate() {
        last_line = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        parser.line(idx + 1, line)?;
    }
    parser.finish(last_line)
}

#[derive(Default)]
struct VoiceState {
    part: VoicePart,
    pending: Bar,
    /// Set once the voice has seen any event or bar line.
    started: bool,
    /// (notes remaining, group size, scale)
    tuplet: Option<(u8, u8, Rational)>,
    chord_symbol: Option<(String, usize, usize)>,
}

impl VoiceState {
    fn new(id: &str) -> Self {
        VoiceState {
            part: VoicePart::new(id),
            ..VoiceState::default()
        }
    }

    fn close_bar(&mut self, right: RightDelim) {
        let mut bar = std::mem::take(&mut self.pending);
        bar.right_delim = right;
        self.part.bars.push(bar);
    }
}

#[derive(Default)]
struct Parser {
    reference: Option<u32>,
    title: Option<String>,
    composer: Option<String>,
    meter: Option<Meter>,
    unit: Option<Rational>,
    key: Option<Key>,
    tempo: Option<String>,
    extra: Vec<String>,
    in_body: bool,
    voices: Vec<VoiceState>,
    current: Option<usize>,
    /// Voice targeted by an unnumbered `%%MIDI program`; last `V:` seen.
    directive_target: Option<usize>,
    unassigned_program: Option<(u8, usize)>,
    deferred_programs: Vec<(String, u8, usize)>,
    warnings: Vec<ParseWarning>,
}

/// Strips a trailing `%` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

/// `T:...` style lines. A note followed by a repeat sign (`b:|`, `G::`) is music.
fn is_field_line(line: &str) -> bool {
    let mut chars = line.chars();
    matches!((chars.next(), chars.next()), (Some(c), Some(':')) if c.is_ascii_alphabetic())
        && !matches!(chars.next(), Some('|' | ':'))
}

fn parse_meter(value: &str) -> Option<Meter> {
    match value.trim() {
        "C" => Some(Meter::new(4, 4)),
        "C|" => Some(Meter::new(2, 2)),
        v => {
            let (n, d) = v.split_once('/')?;
            let n: u32 = n.trim().parse().ok()?;
            let d: u32 = d.trim().parse().ok()?;
            (n > 0 && d > 0).then(|| Meter::new(n, d))
        }
    }
}

fn parse_unit_length(value: &str) -> Option<Rational> {
    let v = value.trim();
    let (n, d) = match v.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().ok()?, d.trim().parse::<i64>().ok()?),
        None => (v.parse::<i64>().ok()?, 1),
    };
    (n > 0 && d > 0).then(|| Rational::new(n, d))
}

/// Splits a `V:` payload into whitespace-separated tokens, keeping quoted
/// values together.
fn voice_tokens(value: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_quote = false;
    for c in value.chars() {
        match c {
            '"' => {
                in_quote = !in_quote;
                cur.push(c);
            }
            c if c.is_whitespace() && !in_quote => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(s)
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, src: &'a str) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(c) => format!("'{c}'"),
            None => "end of line".to_string(),
        }
    }

    fn error(&self, expected: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column(), expected, self.found())
    }

    fn digits(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<Option<i64>, ParseError> {
        let col = self.column();
        match self.digits() {
            None => Ok(None),
            Some(d) => d
                .parse::<i64>()
                .map(Some)
                .map_err(|_| ParseError::new(self.line, col, "a duration that fits in 64 bits", d)),
        }
    }

    /// Duration multiplier: `n`, `/`, `//`, `/n`, `n/m`. Defaults to one.
    fn duration(&mut self) -> Result<Rational, ParseError> {
        let col = self.column();
        let num = self.number()?.unwrap_or(1);
        let mut den: i64 = 1;
        while self.peek() == Some('/') {
            self.bump();
            let d = self.number()?.unwrap_or(2);
            den = den.checked_mul(d).ok_or_else(|| {
                ParseError::new(self.line, col, "a duration that fits in 64 bits", "overflow")
            })?;
            if d == 0 {
                break;
            }
        }
        if num == 0 || den == 0 {
            let text: String = self.chars[col - 1..self.pos].iter().collect();
            return Err(ParseError::new(self.line, col, "a positive duration", text));
        }
        Ok(Rational::new(num, den))
    }

    /// Accidental, letter and octave marks, without duration.
    fn pitch(&mut self) -> Result<Pitch, ParseError> {
        let col = self.column();
        let accidental = match self.peek() {
            Some('^') => Accidental::Sharp,
            Some('_') => Accidental::Flat,
            Some('=') => Accidental::Natural,
            _ => Accidental::None,
        };
        if accidental != Accidental::None {
            self.bump();
        }
        let c = self
            .peek()
            .ok_or_else(|| self.error("note letter A-G or a-g"))?;
        let letter = Letter::from_char(c)
            .filter(|_| c.is_ascii_alphabetic())
            .ok_or_else(|| self.error("note letter A-G or a-g"))?;
        self.bump();
        let mut octave = if c.is_ascii_lowercase() { 1 } else { 0 };
        loop {
            match self.peek() {
                Some('\'') => octave += 1,
                Some(',') => octave -= 1,
                _ => break,
            }
            self.bump();
        }
        let pitch = Pitch::new(letter, accidental, octave);
        if pitch.midi_number().is_err() {
            let text: String = self.chars[col - 1..self.pos].iter().collect();
            return Err(ParseError::new(self.line, col, "a pitch within MIDI range 0..=127", text));
        }
        Ok(pitch)
    }
}

enum BarToken {
    Close(RightDelim),
    RepeatStart,
    EndStart,
}

impl Parser {
    fn warn(&mut self, line: usize, message: impl Into<String>) {
        self.warnings.push(ParseWarning {
            line,
            message: message.into(),
        });
    }

    fn line(&mut self, lineno: usize, line: &str) -> Result<(), ParseError> {
        if line.starts_with("%%") {
            return self.directive(lineno, line.trim_end());
        }
        let content = strip_comment(line);
        if content.trim().is_empty() {
            return Ok(());
        }
        if is_field_line(content.trim_start()) {
            let content = content.trim();
            let letter = content.chars().next().unwrap_or_default();
            let value = &content[2..];
            return if self.in_body {
                self.body_field(lineno, 1, letter, value, content)
            } else {
                self.header_field(lineno, letter, value, content)
            };
        }
        if !self.in_body {
            let expected = if self.reference.is_none() {
                "X: header field"
            } else {
                "K: header field (mandatory before the tune body)"
            };
            return Err(ParseError::new(lineno, 1, expected, content.trim().to_string()));
        }
        self.music(lineno, content)
    }

    fn directive(&mut self, lineno: usize, line: &str) -> Result<(), ParseError> {
        let tokens: Vec<&str> = line[2..].split_whitespace().collect();
        let is_program = tokens.len() >= 2
            && tokens[0].eq_ignore_ascii_case("MIDI")
            && tokens[1].eq_ignore_ascii_case("program");
        if !is_program {
            self.warn(lineno, format!("preserving unrecognized directive {line:?}"));
            self.extra.push(line.to_string());
            return Ok(());
        }
        let args = &tokens[2..];
        let col = line.find(args.first().copied().unwrap_or("")).unwrap_or(0) + 1;
        let program = |s: &str| -> Result<u8, ParseError> {
            s.parse::<u8>()
                .ok()
                .filter(|p| *p <= 127)
                .ok_or_else(|| ParseError::new(lineno, col, "MIDI program in 0..=127", s.to_string()))
        };
        match args {
            [p] => {
                let p = program(p)?;
                match self.directive_target {
                    Some(idx) => self.set_program(idx, p, lineno),
                    None => {
                        if self.unassigned_program.is_some() {
                            self.warn(lineno, "multiple MIDI programs for the default voice; last one wins");
                        }
                        self.unassigned_program = Some((p, lineno));
                    }
                }
            }
            [voice, p] => {
                let p = program(p)?;
                match self.voices.iter().position(|v| v.part.voice_id == *voice) {
                    Some(idx) => self.set_program(idx, p, lineno),
                    None => self.deferred_programs.push((voice.to_string(), p, lineno)),
                }
            }
            _ => {
                return Err(ParseError::new(
                    lineno,
                    col,
                    "%%MIDI program [voice] <0-127>",
                    line.to_string(),
                ))
            }
        }
        Ok(())
    }

    fn set_program(&mut self, idx: usize, program: u8, lineno: usize) {
        if self.voices[idx].part.midi_program.is_some() {
            let id = self.voices[idx].part.voice_id.clone();
            self.warn(lineno, format!("multiple MIDI programs for voice {id}; last one wins"));
        }
        self.voices[idx].part.midi_program = Some(program);
    }

    /// Returns the index of voice `id`, creating it if needed, and applies
    /// any name or properties given on the `V:` line.
    fn declare_voice(&mut self, lineno: usize, column: usize, value: &str) -> Result<usize, ParseError> {
        let tokens = voice_tokens(value);
        let Some((id, rest)) = tokens.split_first() else {
            return Err(ParseError::new(lineno, column, "voice identifier after V:", "nothing"));
        };
        let idx = match self.voices.iter().position(|v| v.part.voice_id == *id) {
            Some(idx) => idx,
            None => {
                self.voices.push(VoiceState::new(id));
                self.voices.len() - 1
            }
        };
        let mut props = Vec::new();
        for tok in rest {
            let lower = tok.to_ascii_lowercase();
            if let Some(name) = lower
                .strip_prefix("name=")
                .or_else(|| lower.strip_prefix("nm="))
                .map(|_| &tok[tok.find('=').unwrap_or(0) + 1..])
            {
                self.voices[idx].part.name = Some(unquote(name).to_string());
            } else {
                props.push(tok.clone());
            }
        }
        if !props.is_empty() {
            self.voices[idx].part.properties = props;
        }
        self.directive_target = Some(idx);
        let pending: Vec<_> = self
            .deferred_programs
            .iter()
            .filter(|(v, _, _)| v == id)
            .map(|(_, p, l)| (*p, *l))
            .collect();
        self.deferred_programs.retain(|(v, _, _)| v != id);
        for (p, l) in pending {
            self.set_program(idx, p, l);
        }
        Ok(idx)
    }

    fn header_field(&mut self, lineno: usize, letter: char, value: &str, raw: &str) -> Result<(), ParseError> {
        let bad = |expected: &str| ParseError::new(lineno, 3, expected, value.trim().to_string());
        match letter {
            'X' => {
                if self.reference.is_some() {
                    return Err(ParseError::new(lineno, 1, "a single X: field", raw.to_string()));
                }
                let x = value
                    .trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|x| *x > 0)
                    .ok_or_else(|| bad("positive reference number"))?;
                self.reference = Some(x);
            }
            'M' => {
                if self.meter.is_some() {
                    return Err(ParseError::new(lineno, 1, "a single M: header field", raw.to_string()));
                }
                self.meter = Some(parse_meter(value).ok_or_else(|| bad("meter such as 4/4, C or C|"))?);
            }
            'L' => {
                if self.unit.is_some() {
                    return Err(ParseError::new(lineno, 1, "a single L: header field", raw.to_string()));
                }
                self.unit = Some(parse_unit_length(value).ok_or_else(|| bad("unit note length such as 1/8"))?);
            }
            'K' => {
                self.key = Some(self.parse_key(lineno, value)?);
                self.begin_body(lineno, raw)?;
            }
            'V' => {
                self.declare_voice(lineno, 3, value)?;
            }
            _ => self.text_field(lineno, letter, value, raw)?,
        }
        Ok(())
    }

    /// T:, C:, Q: and unknown letters; shared by header and body.
    fn text_field(&mut self, lineno: usize, letter: char, value: &str, raw: &str) -> Result<(), ParseError> {
        let slot = match letter {
            'T' => &mut self.title,
            'C' => &mut self.composer,
            'Q' => &mut self.tempo,
            'w' => return Err(ParseError::new(lineno, 1, "music or a supported field (lyrics are not supported)", raw.to_string())),
            's' => return Err(ParseError::new(lineno, 1, "music or a supported field (symbol lines are not supported)", raw.to_string())),
            _ => {
                self.warn(lineno, format!("preserving unrecognized field {raw:?}"));
                self.extra.push(raw.to_string());
                return Ok(());
            }
        };
        if slot.is_none() {
            *slot = Some(value.trim().to_string());
        } else {
            self.extra.push(raw.to_string());
            self.warn(lineno, format!("repeated {letter}: field kept verbatim"));
        }
        Ok(())
    }

    fn parse_key(&mut self, lineno: usize, value: &str) -> Result<Key, ParseError> {
        let mut kept = Vec::new();
        for tok in value.split_whitespace() {
            if tok.contains('=') {
                self.warn(lineno, format!("ignoring key modifier {tok:?}"));
            } else {
                kept.push(tok);
            }
        }
        Key::parse(&kept.join(" ")).map_err(|e| ParseError::new(lineno, 3, e, value.trim().to_string()))
    }

    fn begin_body(&mut self, lineno: usize, raw: &str) -> Result<(), ParseError> {
        let missing = if self.reference.is_none() {
            Some("X: header field before K:")
        } else if self.meter.is_none() {
            Some("M: header field before K:")
        } else if self.unit.is_none() {
            Some("L: header field before K:")
        } else {
            None
        };
        if let Some(expected) = missing {
            return Err(ParseError::new(lineno, 1, expected, raw.to_string()));
        }
        if self.title.is_none() {
            self.warn(lineno, "missing T: field; using an empty title");
        }
        self.in_body = true;
        Ok(())
    }

    fn body_field(&mut self, lineno: usize, column: usize, letter: char, value: &str, raw: &str) -> Result<(), ParseError> {
        match letter {
            'V' => {
                let idx = self.declare_voice(lineno, column + 2, value)?;
                self.current = Some(idx);
            }
            'X' => {
                return Err(ParseError::new(lineno, column, "a single tune (found a second X: field)", raw.to_string()))
            }
            'M' | 'L' | 'K' => {
                let same = match letter {
                    'M' => parse_meter(value) == self.meter,
                    'L' => parse_unit_length(value) == self.unit,
                    _ => Key::parse(value).ok() == self.key,
                };
                if !same {
                    return Err(ParseError::new(
                        lineno,
                        column,
                        format!("no mid-tune {letter}: change (unsupported)"),
                        raw.to_string(),
                    ));
                }
                self.warn(lineno, format!("redundant {letter}: field ignored"));
            }
            _ => self.text_field(lineno, letter, value, raw)?,
        }
        Ok(())
    }

    fn current_voice(&mut self) -> usize {
        if let Some(idx) = self.current {
            return idx;
        }
        if self.voices.is_empty() {
            self.voices.push(VoiceState::new("1"));
        }
        self.current = Some(0);
        if self.directive_target.is_none() {
            self.directive_target = Some(0);
        }
        0
    }

    fn music(&mut self, lineno: usize, line: &str) -> Result<(), ParseError> {
        let mut cur = Cursor::new(lineno, line);
        while let Some(c) = cur.peek() {
            match c {
                c if c.is_whitespace() => {
                    cur.bump();
                }
                '\\' if cur.chars[cur.pos + 1..].iter().all(|c| c.is_whitespace()) => {
                    cur.bump();
                }
                '|' | ':' => {
                    let token = self.bar_token(&mut cur)?;
                    self.bar_line(token);
                }
                '[' => match (cur.peek_at(1), cur.peek_at(2)) {
                    (Some(l), Some(':')) if l.is_ascii_alphabetic() => self.inline_field(&mut cur)?,
                    (Some('|'), _) => return Err(cur.error("a bar line from | |: :| || |] (\"[|\" is not supported)")),
                    (Some(d), _) if d.is_ascii_digit() => {
                        return Err(cur.error("a note or bar line (volta brackets are not supported)"))
                    }
                    _ => {
                        let ev = self.chord(&mut cur)?;
                        self.push_event(&cur, ev)?;
                    }
                },
                '"' => self.chord_symbol(&mut cur)?,
                '(' => self.tuplet(&mut cur)?,
                '-' => {
                    self.tie(&cur)?;
                    cur.bump();
                }
                '^' | '_' | '=' | 'A'..='G' | 'a'..='g' => {
                    let pitch = cur.pitch()?;
                    let duration = cur.duration()?;
                    self.push_event(&cur, NoteEvent::note(pitch, duration))?;
                }
                'z' => {
                    cur.bump();
                    let duration = cur.duration()?;
                    self.push_event(&cur, NoteEvent::rest(duration))?;
                }
                'Z' => {
                    let col = cur.column();
                    cur.bump();
                    let count = cur.number()?.unwrap_or(1);
                    if count <= 0 || count > u32::MAX as i64 || cur.peek() == Some('/') {
                        return Err(ParseError::new(lineno, col, "a positive whole bar count after Z", cur.found()));
                    }
                    let idx = self.current_voice();
                    if self.voices[idx].tuplet.is_some() {
                        return Err(ParseError::new(lineno, col, "a note or rest inside the tuplet", "'Z'"));
                    }
                    let ev = NoteEvent::new(EventKind::MultiBarRest(count as u32), Rational::from_integer(1));
                    self.push_event(&cur, ev)?;
                }
                '>' | '<' => return Err(cur.error("a note, rest or bar line (broken rhythm is not supported)")),
                '{' => return Err(cur.error("a note, rest or bar line (grace notes are not supported)")),
                '!' | '+' | '.' | '~' => {
                    return Err(cur.error("a note, rest or bar line (decorations are not supported)"))
                }
                ')' => return Err(cur.error("a note, rest or bar line (slurs are not supported)")),
                c if c.is_ascii_digit() || c == '/' => return Err(cur.error("a note or rest before the duration")),
                _ => return Err(cur.error("a note letter A-G or a-g, rest or bar line")),
            }
        }
        Ok(())
    }

    fn bar_token(&mut self, cur: &mut Cursor) -> Result<BarToken, ParseError> {
        let first = cur.bump();
        let token = match (first, cur.peek()) {
            (Some('|'), Some(']')) => {
                cur.bump();
                BarToken::Close(RightDelim::Final)
            }
            (Some('|'), Some('|')) => {
                cur.bump();
                BarToken::Close(RightDelim::Double)
            }
            (Some('|'), Some(':')) => {
                cur.bump();
                BarToken::RepeatStart
            }
            (Some('|'), _) => BarToken::Close(RightDelim::Plain),
            (Some(':'), Some('|')) => {
                cur.bump();
                if cur.peek() == Some(':') {
                    cur.bump();
                    BarToken::EndStart
                } else {
                    BarToken::Close(RightDelim::RepeatEnd)
                }
            }
            (Some(':'), Some(':')) => {
                cur.bump();
                BarToken::EndStart
            }
            _ => {
                cur.pos -= 1;
                return Err(cur.error("a bar line (':' must be part of :| or ::)"));
            }
        };
        Ok(token)
    }

    fn bar_line(&mut self, token: BarToken) {
        let idx = self.current_voice();
        let voice = &mut self.voices[idx];
        match token {
            BarToken::Close(right) => {
                let at_voice_start = !voice.started && voice.pending.left_delim == LeftDelim::Plain;
                if voice.pending.events.is_empty() && at_voice_start && right == RightDelim::Plain {
                    // leading bar line
                } else {
                    voice.close_bar(right);
                }
            }
            BarToken::RepeatStart => {
                if !voice.pending.events.is_empty() {
                    voice.close_bar(RightDelim::Plain);
                }
                voice.pending.left_delim = LeftDelim::RepeatStart;
            }
            BarToken::EndStart => {
                voice.close_bar(RightDelim::RepeatEnd);
                voice.pending.left_delim = LeftDelim::RepeatStart;
            }
        }
        voice.started = true;
    }

    fn inline_field(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        let col = cur.column();
        let end = cur.chars[cur.pos..]
            .iter()
            .position(|c| *c == ']')
            .ok_or_else(|| ParseError::new(cur.line, col, "closing ']' of inline field", "end of line"))?;
        let body: String = cur.chars[cur.pos + 1..cur.pos + end].iter().collect();
        cur.pos += end + 1;
        let letter = body.chars().next().unwrap_or_default();
        let value = &body[2..];
        match letter {
            'V' | 'M' | 'L' | 'K' => self.body_field(cur.line, col + 1, letter, value, &body),
            _ => Err(ParseError::new(cur.line, col, "inline field [V:], [M:], [L:] or [K:]", format!("[{body}]"))),
        }
    }

    fn chord(&mut self, cur: &mut Cursor) -> Result<NoteEvent, ParseError> {
        cur.bump();
        let mut pitches: Vec<Pitch> = Vec::new();
        let mut inner: Option<Rational> = None;
        loop {
            match cur.peek() {
                Some(']') => {
                    cur.bump();
                    break;
                }
                None => return Err(cur.error("closing ']' of chord")),
                _ => {
                    let col = cur.column();
                    let pitch = cur.pitch()?;
                    let d = cur.duration()?;
                    if pitches.contains(&pitch) {
                        return Err(ParseError::new(cur.line, col, "distinct chord notes", pitch.to_string()));
                    }
                    match inner {
                        Some(prev) if prev != d => {
                            return Err(ParseError::new(cur.line, col, "equal note lengths inside a chord", pitch.to_string()))
                        }
                        _ => inner = Some(d),
                    }
                    pitches.push(pitch);
                }
            }
        }
        if pitches.is_empty() {
            return Err(ParseError::new(cur.line, cur.column() - 1, "at least one note in chord", "']'"));
        }
        let outer = cur.duration()?;
        let duration = inner.unwrap_or_else(|| Rational::from_integer(1)) * outer;
        Ok(NoteEvent::new(EventKind::Chord(pitches), duration))
    }

    fn chord_symbol(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        let col = cur.column();
        cur.bump();
        let start = cur.pos;
        while cur.peek().is_some_and(|c| c != '"') {
            cur.bump();
        }
        if cur.peek().is_none() {
            return Err(ParseError::new(cur.line, col, "closing '\"' of chord symbol", "end of line"));
        }
        let text: String = cur.chars[start..cur.pos].iter().collect();
        cur.bump();
        let idx = self.current_voice();
        if self.voices[idx].chord_symbol.is_some() {
            return Err(ParseError::new(cur.line, col, "a note or rest after the chord symbol", format!("\"{text}\"")));
        }
        self.voices[idx].chord_symbol = Some((text, cur.line, col));
        Ok(())
    }

    fn tuplet(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        let col = cur.column();
        let size = match cur.peek_at(1) {
            Some(d @ '2'..='9') => d.to_digit(10).unwrap_or(3) as u8,
            _ => {
                cur.bump();
                return Err(cur.error("tuplet size 2-9 after '(' (slurs are not supported)"));
            }
        };
        cur.bump();
        cur.bump();
        if cur.peek() == Some(':') {
            return Err(cur.error("a note after (n (the (p:q:r form is not supported)"));
        }
        let meter = self.meter.unwrap_or(Meter::new(4, 4));
        let time_of = match size {
            2 | 4 | 8 => 3,
            3 | 6 => 2,
            _ if meter.is_compound() => 3,
            _ => 2,
        };
        let idx = self.current_voice();
        if self.voices[idx].tuplet.is_some() {
            return Err(ParseError::new(cur.line, col, "notes of the open tuplet", format!("({size}")));
        }
        self.voices[idx].tuplet = Some((size, size, Rational::new(time_of, size as i64)));
        Ok(())
    }

    fn tie(&mut self, cur: &Cursor) -> Result<(), ParseError> {
        let idx = self.current_voice();
        match self.voices[idx].pending.events.last_mut() {
            Some(ev) if !ev.is_rest() && !ev.tie_to_next => {
                ev.tie_to_next = true;
                Ok(())
            }
            _ => Err(cur.error("a note before the tie")),
        }
    }

    fn push_event(&mut self, cur: &Cursor, mut ev: NoteEvent) -> Result<(), ParseError> {
        let idx = self.current_voice();
        let voice = &mut self.voices[idx];
        if let Some((symbol, _, _)) = voice.chord_symbol.take() {
            ev.chord_symbol = Some(symbol);
        }
        if let Some((remaining, size, scale)) = voice.tuplet {
            ev.tuplet_scale = scale;
            if remaining == size {
                ev.tuplet_start = Some(size);
            }
            voice.tuplet = (remaining > 1).then_some((remaining - 1, size, scale));
        }
        if ev.duration.is_zero() {
            return Err(cur.error("a positive duration"));
        }
        voice.pending.events.push(ev);
        voice.started = true;
        Ok(())
    }

    fn finish(mut self, last_line: usize) -> Result<ParsedTune, ParseError> {
        if !self.in_body {
            let expected = if self.reference.is_none() {
                "X: header field"
            } else {
                "K: header field (mandatory)"
            };
            return Err(ParseError::new(last_line, 1, expected, "end of input"));
        }
        for voice in &mut self.voices {
            if let Some((symbol, line, col)) = &voice.chord_symbol {
                return Err(ParseError::new(*line, *col, "a note or rest after the chord symbol", format!("\"{symbol}\"")));
            }
            if let Some((remaining, size, _)) = voice.tuplet {
                return Err(ParseError::new(
                    last_line,
                    1,
                    format!("{remaining} more note(s) to complete the ({size} tuplet in voice {}", voice.part.voice_id),
                    "end of input",
                ));
            }
            if !voice.pending.events.is_empty() {
                voice.close_bar(RightDelim::Plain);
            }
        }
        if let Some((program, line)) = self.unassigned_program {
            match self.voices.first_mut() {
                Some(v) if v.part.midi_program.is_none() => v.part.midi_program = Some(program),
                _ => self.warn(line, "unnumbered MIDI program before any voice ignored"),
            }
        }
        for (voice, _, line) in std::mem::take(&mut self.deferred_programs) {
            self.warn(line, format!("MIDI program for undeclared voice {voice} ignored"));
        }
        if self.voices.iter().all(|v| v.part.bars.is_empty()) {
            return Err(ParseError::new(last_line, 1, "at least one bar of music", "end of input"));
        }
        let header = TuneHeader {
            reference_number: self.reference.unwrap_or(1),
            title: self.title.unwrap_or_default(),
            composer: self.composer,
            meter: self.meter.unwrap_or(Meter::new(4, 4)),
            unit_note_length: self.unit.unwrap_or(Rational::new(1, 8)),
            key: self.key.unwrap_or(Key::major(Letter::C)),
            tempo: self.tempo,
            extra_fields: self.extra,
        };
        Ok(ParsedTune {
            tune: Tune {
                header,
                voices: self.voices.into_iter().map(|v| v.part).collect(),
            },
            warnings: self.warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::ast::Mode;

    const TEMPLATE: &str = "X:1\nT:Title\nC:Composer\nM:4/4\nL:1/8\nK:C\n|:GABc d2e2|f2d2 e4|g4 f2e2|d6 z2:|\n|:c2A2 B2G2|A2F2 G4|E2c2 D2B,2|C6 z2:|\n";

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn template_structure() {
        let tune = parse_tune(TEMPLATE).unwrap();
        assert_eq!(tune.voices.len(), 1);
        assert_eq!(tune.voices[0].voice_id, "1");
        let bars = &tune.voices[0].bars;
        assert_eq!(bars.len(), 8);
        assert_eq!(bars[0].left_delim, LeftDelim::RepeatStart);
        assert_eq!(bars[3].right_delim, RightDelim::RepeatEnd);
        assert_eq!(bars[4].left_delim, LeftDelim::RepeatStart);
        assert_eq!(bars[7].right_delim, RightDelim::RepeatEnd);
        assert_eq!(tune.header.meter, Meter::new(4, 4));
        assert_eq!(tune.header.unit_note_length, r(1, 8));
        assert_eq!(tune.header.key.mode, Mode::Major);
        assert_eq!(tune.header.key.tonic, Letter::C);
        assert_eq!(tune.header.composer.as_deref(), Some("Composer"));
        // B, in the second section
        let b = &bars[6].events[3];
        assert_eq!(b.kind, EventKind::Note(Pitch::natural(Letter::B, -1)));
    }

    #[test]
    fn single_rest_tune() {
        let tune = parse_tune("X:1\nT:\nM:4/4\nL:1/4\nK:C\nz4|").unwrap();
        assert_eq!(tune.header.title, "");
        let bars = &tune.voices[0].bars;
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].events, vec![NoteEvent::rest(r(4, 1))]);
    }

    #[test]
    fn missing_key_is_reported() {
        let err = parse_tune("X:1\nM:4/4\nL:1/8\nGABc d2e2|").unwrap_err();
        assert!(err.expected.contains("K:"), "{err}");
        assert_eq!(err.line, 4);
        let err = parse_tune("X:1\nM:4/4\nL:1/8\n").unwrap_err();
        assert!(err.expected.contains("K:"), "{err}");
    }

    #[test]
    fn other_mandatory_headers() {
        let err = parse_tune("X:1\nL:1/8\nK:C\nC|").unwrap_err();
        assert!(err.expected.starts_with("M:"));
        let err = parse_tune("X:1\nM:4/4\nK:C\nC|").unwrap_err();
        assert!(err.expected.starts_with("L:"));
        let err = parse_tune("T:x\nM:4/4\nL:1/8\nK:C\nC|").unwrap_err();
        assert!(err.expected.starts_with("X:"));
    }

    #[test]
    fn missing_title_warns() {
        let parsed = parse_tune_with_warnings("X:1\nM:4/4\nL:1/8\nK:C\nC8|").unwrap();
        assert_eq!(parsed.tune.header.title, "");
        assert!(parsed.warnings.iter().any(|w| w.message.contains("T:")));
    }

    #[test]
    fn durations() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC C2 C/ C// C/4 C3/2 z3|").unwrap();
        let d: Vec<_> = tune.voices[0].bars[0].events.iter().map(|e| e.duration).collect();
        assert_eq!(d, vec![r(1, 1), r(2, 1), r(1, 2), r(1, 4), r(1, 4), r(3, 2), r(3, 1)]);
        let err = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC0|").unwrap_err();
        assert_eq!((err.line, err.column), (6, 2));
        let err = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC/0|").unwrap_err();
        assert!(err.expected.contains("positive duration"));
    }

    #[test]
    fn accidentals_and_octaves() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n^F _B, =c' C,,|").unwrap();
        let ev = &tune.voices[0].bars[0].events;
        assert_eq!(ev[0].kind, EventKind::Note(Pitch::new(Letter::F, Accidental::Sharp, 0)));
        assert_eq!(ev[1].kind, EventKind::Note(Pitch::new(Letter::B, Accidental::Flat, -1)));
        assert_eq!(ev[2].kind, EventKind::Note(Pitch::new(Letter::C, Accidental::Natural, 2)));
        assert_eq!(ev[3].pitches()[0].midi_value(), 36);
    }

    #[test]
    fn chords_symbols_ties_tuplets() {
        let src = "X:1\nT:t\nM:4/4\nL:1/8\nK:C\n\"Am\"[A,CE]2 [C2E2]- [CE]2 (3ABc z|";
        let tune = parse_tune(src).unwrap();
        let ev = &tune.voices[0].bars[0].events;
        assert_eq!(ev[0].chord_symbol.as_deref(), Some("Am"));
        assert_eq!(ev[0].pitches().len(), 3);
        assert_eq!(ev[0].duration, r(2, 1));
        assert_eq!(ev[1].duration, r(2, 1));
        assert!(ev[1].tie_to_next);
        assert_eq!(ev[3].tuplet_start, Some(3));
        assert_eq!(ev[3].tuplet_scale, r(2, 3));
        assert_eq!(ev[5].tuplet_scale, r(2, 3));
        assert_eq!(ev[5].tuplet_start, None);
        assert_eq!(ev[6].tuplet_scale, r(1, 1));
    }

    #[test]
    fn compound_meter_tuplets() {
        let tune = parse_tune("X:1\nT:t\nM:6/8\nL:1/8\nK:C\n(5ABcde (2AB|").unwrap();
        let ev = &tune.voices[0].bars[0].events;
        assert_eq!(ev[0].tuplet_scale, r(3, 5));
        assert_eq!(ev[5].tuplet_scale, r(3, 2));
    }

    #[test]
    fn voices_and_programs() {
        let src = "X:1\nT:t\nM:4/4\nL:1/8\nK:C\nV:1 name=\"Upright Bass\" clef=bass\n%%MIDI program 43\nC,8|\nV:2 name=Violin\n%%MIDI program 40\n%%MIDI program 41\nc8|\n[V:1] D,8|\n";
        let parsed = parse_tune_with_warnings(src).unwrap();
        let tune = parsed.tune;
        assert_eq!(tune.voices.len(), 2);
        assert_eq!(tune.voices[0].name.as_deref(), Some("Upright Bass"));
        assert_eq!(tune.voices[0].properties, vec!["clef=bass".to_string()]);
        assert_eq!(tune.voices[0].midi_program, Some(43));
        assert_eq!(tune.voices[0].bars.len(), 2);
        assert_eq!(tune.voices[1].midi_program, Some(41));
        assert!(parsed.warnings.iter().any(|w| w.message.contains("last one wins")));
    }

    #[test]
    fn numbered_program_directive() {
        let src = "X:1\nT:t\nM:4/4\nL:1/8\nK:C\n%%MIDI program 2 21\nV:1\nC8|\nV:2\nE8|\n";
        let tune = parse_tune(src).unwrap();
        assert_eq!(tune.voices[0].midi_program, None);
        assert_eq!(tune.voices[1].midi_program, Some(21));
    }

    #[test]
    fn program_out_of_range() {
        let err = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n%%MIDI program 128\nC8|").unwrap_err();
        assert_eq!(err.line, 6);
        assert_eq!(err.found, "128");
    }

    #[test]
    fn rejected_constructs() {
        for body in ["A>B c2|", "{g}A2|", "!trill!A|", "(AB)|", "A2 B2|1 c|", "w:la la", "x2|", "H2|", "\"C A|", "[CE|", "A ]", "^^A|"] {
            let src = format!("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n{body}");
            assert!(parse_tune(&src).is_err(), "{body} should fail");
        }
    }

    #[test]
    fn error_positions_are_exact() {
        let err = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nCDEF G>A|").unwrap_err();
        assert_eq!((err.line, err.column), (6, 7));
        assert_eq!(err.found, "'>'");
        let err = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nCD \"Am EF|").unwrap_err();
        assert_eq!((err.line, err.column), (6, 4));
    }

    #[test]
    fn extra_fields_preserved() {
        let src = "X:1\nT:t\nR:reel\nZ:someone\nM:4/4\nL:1/8\n%%score (1 2)\nK:C % comment\nC8|\n";
        let parsed = parse_tune_with_warnings(src).unwrap();
        assert_eq!(parsed.tune.header.extra_fields, vec!["R:reel", "Z:someone", "%%score (1 2)"]);
        assert_eq!(parsed.warnings.len(), 3);
    }

    #[test]
    fn crlf_and_blank_lines() {
        let src = "X:1\r\n\r\nT:t\r\nM:C\r\nL:1/8\r\nK:Am\r\n\r\nA8|\r\n";
        let tune = parse_tune(src).unwrap();
        assert_eq!(tune.header.key.mode, Mode::Minor);
        assert_eq!(tune.voices[0].bars.len(), 1);
    }

    #[test]
    fn empty_bars_and_bar_lines() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n|C8| |D8||E8::F8|]").unwrap();
        let bars = &tune.voices[0].bars;
        assert_eq!(bars.len(), 5);
        assert!(bars[1].events.is_empty());
        assert_eq!(bars[2].right_delim, RightDelim::Double);
        assert_eq!(bars[3].right_delim, RightDelim::RepeatEnd);
        assert_eq!(bars[4].left_delim, LeftDelim::RepeatStart);
        assert_eq!(bars[4].right_delim, RightDelim::Final);
    }

    #[test]
    fn bars_continue_across_lines() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nCDEF\nGABc|").unwrap();
        assert_eq!(tune.voices[0].bars.len(), 1);
        assert_eq!(tune.voices[0].bars[0].events.len(), 8);
    }

    #[test]
    fn note_before_repeat_is_music() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nc8|\nb:| B::\n").unwrap();
        assert_eq!(tune.voices[0].bars.len(), 3);
        assert!(tune.header.extra_fields.is_empty());
    }

    #[test]
    fn multibar_rest() {
        let tune = parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nZ4|C8|").unwrap();
        assert_eq!(tune.voices[0].bars[0].events[0].kind, EventKind::MultiBarRest(4));
        assert_eq!(tune.voices[0].measure_count(), 5);
    }

    #[test]
    fn mid_tune_changes() {
        assert!(parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC8|\nM:3/4\nC6|").is_err());
        assert!(parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC8|\nK:C\nC8|").is_ok());
        assert!(parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\nC8|\nX:2\n").is_err());
    }

    #[test]
    fn empty_body_is_rejected() {
        assert!(parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n").is_err());
    }

    #[test]
    fn unfinished_tuplet_is_rejected() {
        assert!(parse_tune("X:1\nT:t\nM:4/4\nL:1/8\nK:C\n(3AB|").is_err());
    }
}
