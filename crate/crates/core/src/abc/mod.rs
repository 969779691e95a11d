//! ABC notation: syntax tree, parser, serializer and transcript extraction.

mod ast;
mod extract;
mod parser;
mod pitch;
mod serialize;

pub use ast::{
    Bar, EventKind, Key, LeftDelim, Meter, Mode, NoteEvent, RightDelim, Tune, TuneHeader,
    VoicePart,
};
pub use extract::extract_abc_blocks;
pub use parser::{parse_tune, parse_tune_with_warnings, ParseError, ParseWarning, ParsedTune};
pub use pitch::{midi_number, Accidental, Letter, Pitch, RangeError};
pub use serialize::serialize_tune;
