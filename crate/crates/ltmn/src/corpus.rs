//! Aligned lyrics/melody corpus: parsing, vocabulary construction, and the
//! fixed note-attribute class sets.
//!
//! Corpus text format, one song per line:
//!
//! ```text
//! lis|ten TO ME : 62/1/0 64/0.5/0 60/1/0.5 58/2/0
//! ```
//!
//! `|` joins syllables inside a word, whitespace separates words, `:`
//! separates lyrics from one `pitch/duration/rest` triplet per syllable.
//! Lines starting with `#` and blank lines are skipped. Tokens are
//! lowercased before any vocabulary lookup.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

/// Note durations in stave units (1 = one quarter note). Class ids follow
/// ascending numeric order.
pub const DURATION_VALUES: [f64; 11] = [
    0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0,
];

/// Rest lengths: zero plus the duration set.
pub const REST_VALUES: [f64; 12] = [
    0.0, 0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0,
];

/// MIDI pitch range; the class id of a pitch is the pitch itself.
pub const PITCH_CLASSES: usize = 128;

/// The three generated note attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrKind {
    Pitch,
    Duration,
    Rest,
}

impl AttrKind {
    pub const ALL: [AttrKind; 3] = [AttrKind::Pitch, AttrKind::Duration, AttrKind::Rest];

    pub fn class_count(self) -> usize {
        match self {
            AttrKind::Pitch => PITCH_CLASSES,
            AttrKind::Duration => DURATION_VALUES.len(),
            AttrKind::Rest => REST_VALUES.len(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttrKind::Pitch => "pitch",
            AttrKind::Duration => "duration",
            AttrKind::Rest => "rest",
        }
    }
}

/// One note aligned to one syllable. Always constructed through
/// [`validate_attributes`], so the fields are guaranteed to be in range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteAttributes {
    pub pitch: u8,
    pub duration: f64,
    pub rest: f64,
}

impl NoteAttributes {
    pub fn pitch_class(&self) -> usize {
        self.pitch as usize
    }

    pub fn duration_class(&self) -> usize {
        attribute_class_index(AttrKind::Duration, self.duration)
            .expect("validated duration is always in the class set")
    }

    pub fn rest_class(&self) -> usize {
        attribute_class_index(AttrKind::Rest, self.rest)
            .expect("validated rest is always in the class set")
    }

    pub fn class(&self, kind: AttrKind) -> usize {
        match kind {
            AttrKind::Pitch => self.pitch_class(),
            AttrKind::Duration => self.duration_class(),
            AttrKind::Rest => self.rest_class(),
        }
    }
}

/// Checks a raw `pitch/duration/rest` triplet against the attribute domains.
/// Matching against the duration and rest sets is exact, not approximate.
pub fn validate_attributes(pitch: f64, duration: f64, rest: f64) -> Result<NoteAttributes> {
    if !pitch.is_finite() || pitch.fract() != 0.0 || !(0.0..=127.0).contains(&pitch) {
        return Err(Error::invalid(format!(
            "pitch {pitch} is not an integer in 0..=127"
        )));
    }
    if !DURATION_VALUES.contains(&duration) {
        return Err(Error::invalid(format!(
            "duration {duration} is not one of {DURATION_VALUES:?}"
        )));
    }
    if !REST_VALUES.contains(&rest) {
        return Err(Error::invalid(format!(
            "rest {rest} is not one of {REST_VALUES:?}"
        )));
    }
    Ok(NoteAttributes {
        pitch: pitch as u8,
        duration,
        rest,
    })
}

/// Class id of an attribute value. Pitch maps to itself; duration and rest
/// map to their position in the ascending value set.
pub fn attribute_class_index(kind: AttrKind, value: f64) -> Result<usize> {
    match kind {
        AttrKind::Pitch => {
            if value.is_finite() && value.fract() == 0.0 && (0.0..=127.0).contains(&value) {
                Ok(value as usize)
            } else {
                Err(Error::invalid(format!(
                    "pitch {value} is not an integer in 0..=127"
                )))
            }
        }
        AttrKind::Duration => DURATION_VALUES
            .iter()
            .position(|v| *v == value)
            .ok_or_else(|| Error::invalid(format!("duration {value} has no class"))),
        AttrKind::Rest => REST_VALUES
            .iter()
            .position(|v| *v == value)
            .ok_or_else(|| Error::invalid(format!("rest {value} has no class"))),
    }
}

/// Inverse of [`attribute_class_index`].
pub fn attribute_class_value(kind: AttrKind, class: usize) -> Result<f64> {
    if class >= kind.class_count() {
        return Err(Error::invalid(format!(
            "{} class {class} out of range 0..{}",
            kind.name(),
            kind.class_count()
        )));
    }
    Ok(match kind {
        AttrKind::Pitch => class as f64,
        AttrKind::Duration => DURATION_VALUES[class],
        AttrKind::Rest => REST_VALUES[class],
    })
}

/// One song: lowercased syllables, their grouping into words and lyric
/// lines, and one note per syllable.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSong {
    syllables: Vec<String>,
    word_bounds: Vec<Range<usize>>,
    sentence_bounds: Vec<Range<usize>>,
    notes: Vec<NoteAttributes>,
}

impl AlignedSong {
    /// Validates the alignment invariants: notes match syllables one to one,
    /// `word_bounds` partitions the syllables, and `sentence_bounds`
    /// partitions the words, all contiguously and without empty groups.
    pub fn new(
        syllables: Vec<String>,
        word_bounds: Vec<Range<usize>>,
        sentence_bounds: Vec<Range<usize>>,
        notes: Vec<NoteAttributes>,
    ) -> Result<Self> {
        if syllables.is_empty() {
            return Err(Error::invalid("song has no syllables"));
        }
        if notes.len() != syllables.len() {
            return Err(Error::shape(format!(
                "{} syllables but {} notes",
                syllables.len(),
                notes.len()
            )));
        }
        check_partition(&word_bounds, syllables.len(), "word")?;
        check_partition(&sentence_bounds, word_bounds.len(), "sentence")?;
        Ok(AlignedSong {
            syllables,
            word_bounds,
            sentence_bounds,
            notes,
        })
    }

    pub fn syllables(&self) -> &[String] {
        &self.syllables
    }

    pub fn notes(&self) -> &[NoteAttributes] {
        &self.notes
    }

    pub fn word_bounds(&self) -> &[Range<usize>] {
        &self.word_bounds
    }

    pub fn sentence_bounds(&self) -> &[Range<usize>] {
        &self.sentence_bounds
    }

    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }

    pub fn word_count(&self) -> usize {
        self.word_bounds.len()
    }

    pub fn word_text(&self, word: usize) -> String {
        self.syllables[self.word_bounds[word].clone()].concat()
    }

    pub fn word_of_syllable(&self, syllable: usize) -> usize {
        self.word_bounds
            .iter()
            .position(|r| r.contains(&syllable))
            .expect("syllable index inside song")
    }

    /// Syllables as vocabulary tokens: a trailing `|` marks a syllable that
    /// continues into the next one, so word structure survives tokenization
    /// and generated token streams can be regrouped into words.
    pub fn syllable_tokens(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.syllables.len());
        for bounds in &self.word_bounds {
            for s in bounds.clone() {
                if s + 1 < bounds.end {
                    out.push(format!("{}|", self.syllables[s]));
                } else {
                    out.push(self.syllables[s].clone());
                }
            }
        }
        out
    }

    /// Word text that each syllable belongs to, parallel to `syllables`.
    pub fn word_of_each_syllable(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.syllables.len());
        for (w, bounds) in self.word_bounds.iter().enumerate() {
            for _ in bounds.clone() {
                out.push(self.word_text(w));
            }
        }
        out
    }
}

fn check_partition(bounds: &[Range<usize>], total: usize, what: &str) -> Result<()> {
    let mut expected = 0;
    for r in bounds {
        if r.start != expected || r.end <= r.start {
            return Err(Error::invalid(format!(
                "{what} bounds {r:?} do not form a contiguous non-empty partition"
            )));
        }
        expected = r.end;
    }
    if expected != total {
        return Err(Error::invalid(format!(
            "{what} bounds cover {expected} of {total} items"
        )));
    }
    Ok(())
}

/// Parses a whole corpus file. See the module docs for the line format.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<AlignedSong>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_str(&text)
}

pub fn parse_corpus_str(text: &str) -> Result<Vec<AlignedSong>> {
    let mut songs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        songs.push(parse_song_line(idx + 1, line)?);
    }
    Ok(songs)
}

fn parse_song_line(line_no: usize, line: &str) -> Result<AlignedSong> {
    let (lyrics_part, notes_part) = line
        .split_once(':')
        .ok_or_else(|| Error::parse(line_no, "missing ':' between lyrics and notes"))?;

    let mut syllables = Vec::new();
    let mut word_bounds = Vec::new();
    for chunk in lyrics_part.split_whitespace() {
        let start = syllables.len();
        for part in chunk.split('|') {
            if part.is_empty() {
                return Err(Error::parse(
                    line_no,
                    format!("word {chunk:?} has an empty syllable"),
                ));
            }
            syllables.push(part.to_lowercase());
        }
        word_bounds.push(start..syllables.len());
    }
    if syllables.is_empty() {
        return Err(Error::parse(line_no, "no lyrics before ':'"));
    }

    let mut notes = Vec::new();
    for triplet in notes_part.split_whitespace() {
        let fields: Vec<&str> = triplet.split('/').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line_no,
                format!("note {triplet:?} is not pitch/duration/rest"),
            ));
        }
        let mut parsed = [0.0f64; 3];
        for (slot, (name, field)) in parsed
            .iter_mut()
            .zip(["pitch", "duration", "rest"].iter().zip(&fields))
        {
            *slot = field.parse().map_err(|_| {
                Error::parse(line_no, format!("{name} {field:?} is not a number"))
            })?;
        }
        notes.push(
            validate_attributes(parsed[0], parsed[1], parsed[2])
                .map_err(|e| Error::parse(line_no, e.to_string()))?,
        );
    }
    if notes.len() != syllables.len() {
        return Err(Error::parse(
            line_no,
            format!("{} syllables but {} notes", syllables.len(), notes.len()),
        ));
    }

    // This line format carries one lyric line per song.
    let sentence_bounds = vec![0..word_bounds.len()];
    AlignedSong::new(syllables, word_bounds, sentence_bounds, notes)
        .map_err(|e| Error::parse(line_no, e.to_string()))
}

/// Formats a number the way the corpus format expects: shortest decimal
/// that round-trips (`1`, `0.5`, `0.125`).
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Renders one song back into the corpus line format.
pub fn serialize_song(song: &AlignedSong) -> String {
    let mut out = String::new();
    for (w, bounds) in song.word_bounds.iter().enumerate() {
        if w > 0 {
            out.push(' ');
        }
        out.push_str(&song.syllables[bounds.clone()].join("|"));
    }
    out.push_str(" :");
    for n in &song.notes {
        let _ = write!(
            out,
            " {}/{}/{}",
            n.pitch,
            format_value(n.duration),
            format_value(n.rest)
        );
    }
    out
}

pub fn serialize_corpus(songs: &[AlignedSong]) -> String {
    let mut out = String::new();
    for s in songs {
        out.push_str(&serialize_song(s));
        out.push('\n');
    }
    out
}

/// Vocabulary level: marked syllable tokens or whole-word tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabLevel {
    Syllable,
    Word,
}

impl VocabLevel {
    pub fn name(self) -> &'static str {
        match self {
            VocabLevel::Syllable => "syllable",
            VocabLevel::Word => "word",
        }
    }
}

/// Token table with dense contiguous ids. Ids 0..=2 are the reserved
/// markers; real tokens follow ordered by descending count then token text,
/// so the most frequent token always has id 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, u32>,
    counts: Vec<u64>,
}

pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

impl Vocabulary {
    pub const BOS: u32 = 0;
    pub const EOS: u32 = 1;
    pub const UNK: u32 = 2;
    pub const RESERVED: u32 = 3;

    fn with_reserved() -> Self {
        let reserved = [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];
        Vocabulary {
            id_to_token: reserved.iter().map(|s| s.to_string()).collect(),
            token_to_id: reserved
                .iter()
                .enumerate()
                .map(|(i, s)| (s.to_string(), i as u32))
                .collect(),
            counts: vec![0; reserved.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id of a token, falling back to `UNK` for unknown tokens.
    pub fn id(&self, token: &str) -> u32 {
        self.lookup(token).unwrap_or(Self::UNK)
    }

    pub fn lookup(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Result<&str> {
        self.id_to_token
            .get(id as usize)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::invalid(format!("token id {id} out of range 0..{}", self.len())))
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Ids of the `k` most frequent non-reserved tokens.
    pub fn top_k_ids(&self, k: usize) -> Vec<u32> {
        (Self::RESERVED..self.len() as u32)
            .filter(|id| self.count(*id) > 0)
            .take(k)
            .collect()
    }

    /// One `token<TAB>id<TAB>count` line per token, ordered by id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, token) in self.id_to_token.iter().enumerate() {
            let _ = writeln!(out, "{token}\t{id}\t{}", self.counts[id]);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut id_to_token = Vec::new();
        let mut counts = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(idx + 1, "expected token<TAB>id<TAB>count"));
            }
            let id: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad id {:?}", fields[1])))?;
            if id != id_to_token.len() {
                return Err(Error::parse(
                    idx + 1,
                    format!("id {id} breaks dense ordering, expected {}", id_to_token.len()),
                ));
            }
            let count: u64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad count {:?}", fields[2])))?;
            id_to_token.push(fields[0].to_string());
            counts.push(count);
        }
        for (id, expected) in [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN].iter().enumerate() {
            if id_to_token.get(id).map(String::as_str) != Some(*expected) {
                return Err(Error::invalid(format!(
                    "vocabulary must reserve id {id} for {expected}"
                )));
            }
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            id_to_token,
            token_to_id,
            counts,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }
}

/// Builds a vocabulary over one tokenization level. Tokens seen fewer than
/// `min_count` times fold into `UNK`, whose count then aggregates theirs.
pub fn build_vocab(songs: &[AlignedSong], level: VocabLevel, min_count: u64) -> Result<Vocabulary> {
    if songs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from zero songs"));
    }
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for song in songs {
        match level {
            VocabLevel::Syllable => {
                for t in song.syllable_tokens() {
                    *freq.entry(t).or_insert(0) += 1;
                }
            }
            VocabLevel::Word => {
                for w in 0..song.word_count() {
                    *freq.entry(song.word_text(w)).or_insert(0) += 1;
                }
            }
        }
    }
    for reserved in [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN] {
        if freq.contains_key(reserved) {
            return Err(Error::invalid(format!(
                "corpus token {reserved:?} collides with a reserved marker"
            )));
        }
    }
    let mut kept: Vec<(String, u64)> = Vec::new();
    let mut dropped = 0u64;
    for (token, count) in freq {
        if count >= min_count {
            kept.push((token, count));
        } else {
            dropped += count;
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut vocab = Vocabulary::with_reserved();
    vocab.counts[Vocabulary::UNK as usize] = dropped;
    for (token, count) in kept {
        let id = vocab.id_to_token.len() as u32;
        vocab.token_to_id.insert(token.clone(), id);
        vocab.id_to_token.push(token);
        vocab.counts.push(count);
    }
    Ok(vocab)
}

/// Empirical class distributions of the three note attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDistributions {
    pub pitch: Vec<f64>,
    pub duration: Vec<f64>,
    pub rest: Vec<f64>,
}

impl AttributeDistributions {
    pub fn get(&self, kind: AttrKind) -> &[f64] {
        match kind {
            AttrKind::Pitch => &self.pitch,
            AttrKind::Duration => &self.duration,
            AttrKind::Rest => &self.rest,
        }
    }
}

/// Normalized histograms over the attribute class sets, indexed by class id.
pub fn attribute_distribution(songs: &[AlignedSong]) -> Result<AttributeDistributions> {
    let total: usize = songs.iter().map(|s| s.notes.len()).sum();
    if total == 0 {
        return Err(Error::invalid("no notes to build attribute distributions"));
    }
    let mut pitch = vec![0.0; PITCH_CLASSES];
    let mut duration = vec![0.0; DURATION_VALUES.len()];
    let mut rest = vec![0.0; REST_VALUES.len()];
    for song in songs {
        for n in &song.notes {
            pitch[n.pitch_class()] += 1.0;
            duration[n.duration_class()] += 1.0;
            rest[n.rest_class()] += 1.0;
        }
    }
    for hist in [&mut pitch, &mut duration, &mut rest] {
        for v in hist.iter_mut() {
            *v /= total as f64;
        }
    }
    Ok(AttributeDistributions {
        pitch,
        duration,
        rest,
    })
}

/// Word spelling to marked syllable tokens, taken from the first occurrence
/// of each word in the corpus. Used to syllabify seed text.
pub fn build_lexicon(songs: &[AlignedSong]) -> HashMap<String, Vec<String>> {
    let mut lexicon = HashMap::new();
    for song in songs {
        let tokens = song.syllable_tokens();
        for (w, bounds) in song.word_bounds.iter().enumerate() {
            lexicon
                .entry(song.word_text(w))
                .or_insert_with(|| tokens[bounds.clone()].to_vec());
        }
    }
    lexicon
}
