//! Token grammars of the two encodings and the symbol categories used for
//! per-category error analysis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Semantic,
    Agnostic,
}

impl Encoding {
    /// Token-file extension (without the dot).
    pub fn extension(self) -> &'static str {
        match self {
            Encoding::Semantic => "semantic",
            Encoding::Agnostic => "agnostic",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "semantic" => Ok(Encoding::Semantic),
            "agnostic" => Ok(Encoding::Agnostic),
            other => Err(Error::UnknownEncoding(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Accidentals,
    Barlines,
    Clefs,
    Fermatas,
    GraceNotes,
    KeySignatures,
    MeterSigns,
    MultiRests,
    Notes,
    Others,
    Rests,
    Slurs,
    Ties,
    TimeSignatures,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Accidentals => "Accidentals",
            Category::Barlines => "Barlines",
            Category::Clefs => "Clefs",
            Category::Fermatas => "Fermatas",
            Category::GraceNotes => "GraceNotes",
            Category::KeySignatures => "KeySignatures",
            Category::MeterSigns => "MeterSigns",
            Category::MultiRests => "MultiRests",
            Category::Notes => "Notes",
            Category::Others => "Others",
            Category::Rests => "Rests",
            Category::Slurs => "Slurs",
            Category::Ties => "Ties",
            Category::TimeSignatures => "TimeSignatures",
        }
    }

    pub fn carries_pitch(self) -> bool {
        matches!(self, Category::Notes | Category::GraceNotes)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoteFields {
    pub category: Category,
    pub pitch: Option<String>,
    pub note_type: Option<String>,
}

/// Classifies a token and, for notes, extracts pitch and duration type.
///
/// Semantic tokens look like `note-C4_quarter`, `clef-G2`, `barline`; the
/// category is the text before the first `-`, and a note body splits into
/// `<pitch>_<type>` at the first `_`.
///
/// Agnostic tokens look like `note.quarter-L1`, `accidental.sharp-S3`,
/// `barline-L1`; the category is the text before the first `.` or `-`. For
/// notes the type sits between `.` and `-` and the staff position after the
/// `-` serves as the pitch.
pub fn parse_token(token: &str, encoding: Encoding) -> NoteFields {
    match encoding {
        Encoding::Semantic => parse_semantic(token),
        Encoding::Agnostic => parse_agnostic(token),
    }
}

fn plain(category: Category) -> NoteFields {
    NoteFields {
        category,
        pitch: None,
        note_type: None,
    }
}

fn parse_semantic(token: &str) -> NoteFields {
    let (prefix, body) = token.split_once('-').unwrap_or((token, ""));
    let category = match prefix {
        "note" => Category::Notes,
        "gracenote" => Category::GraceNotes,
        "rest" => Category::Rests,
        "multirest" => Category::MultiRests,
        "barline" => Category::Barlines,
        "clef" => Category::Clefs,
        "keySignature" => Category::KeySignatures,
        "timeSignature" => Category::TimeSignatures,
        "tie" => Category::Ties,
        _ => Category::Others,
    };
    if !category.carries_pitch() {
        return plain(category);
    }
    let (pitch, note_type) = body.split_once('_').unwrap_or((body, ""));
    NoteFields {
        category,
        pitch: Some(pitch.to_string()),
        note_type: Some(note_type.to_string()),
    }
}

fn parse_agnostic(token: &str) -> NoteFields {
    let cut = token.find(['.', '-']).unwrap_or(token.len());
    let category = match &token[..cut] {
        "accidental" => Category::Accidentals,
        "barline" => Category::Barlines,
        "clef" => Category::Clefs,
        "fermata" => Category::Fermatas,
        "gracenote" => Category::GraceNotes,
        "metersign" => Category::MeterSigns,
        "note" => Category::Notes,
        "rest" => Category::Rests,
        "slur" => Category::Slurs,
        _ => Category::Others,
    };
    if !category.carries_pitch() {
        return plain(category);
    }
    let rest = token[cut..].trim_start_matches('.');
    let (note_type, position) = rest.split_once('-').unwrap_or((rest, ""));
    NoteFields {
        category,
        pitch: Some(position.to_string()),
        note_type: Some(note_type.to_string()),
    }
}
