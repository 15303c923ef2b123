//! Standard MIDI (format 0) emission and a plain-text score.
//!
//! One stave unit of duration equals one quarter note, 480 ticks at 120 bpm
//! by default. A note's rest precedes it, so
//! `onset_k = sum_{i<=k} rest_i*Q + sum_{i<k} duration_i*Q` with Q = ticks
//! per stave unit. All duration and rest values are dyadic, so tick products
//! are exact in f64 whenever Q is a multiple of 8. Output is byte-exact for
//! identical input: events at the same tick are ordered note-off, lyric,
//! note-on.

use crate::corpus::{format_value, NoteAttributes};
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

pub const DEFAULT_TEMPO_BPM: u32 = 120;
pub const DEFAULT_RESOLUTION: u16 = 480;
pub const NOTE_VELOCITY: u8 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MidiNote {
    pub onset: u32,
    pub dur_ticks: u32,
    pub pitch: u8,
    pub velocity: u8,
}

/// A renderable song: tempo, tick resolution, onset-sorted notes, and lyric
/// events aligned to note onsets.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiSong {
    pub tempo_bpm: u32,
    pub resolution: u16,
    pub notes: Vec<MidiNote>,
    pub lyrics: Vec<(u32, String)>,
}

impl MidiSong {
    pub fn validate(&self) -> Result<()> {
        if self.tempo_bpm == 0 {
            return Err(Error::invalid("tempo must be positive"));
        }
        if self.resolution == 0 || self.resolution >= 0x8000 {
            return Err(Error::invalid(format!(
                "resolution {} outside 1..=32767",
                self.resolution
            )));
        }
        if self.notes.is_empty() {
            return Err(Error::invalid("song has no notes"));
        }
        let mut prev = 0u32;
        for n in &self.notes {
            if n.onset < prev {
                return Err(Error::invalid("note onsets must be non-decreasing"));
            }
            prev = n.onset;
            if n.pitch > 127 {
                return Err(Error::invalid(format!("pitch {} above 127", n.pitch)));
            }
            if n.velocity == 0 || n.velocity > 127 {
                return Err(Error::invalid(format!(
                    "velocity {} outside 1..=127",
                    n.velocity
                )));
            }
        }
        Ok(())
    }

    /// Final tick of the song: the last note-off.
    pub fn end_tick(&self) -> u32 {
        self.notes
            .iter()
            .map(|n| n.onset + n.dur_ticks)
            .max()
            .unwrap_or(0)
    }
}

/// Exact tick count of a stave-unit value, or an error when the resolution
/// cannot represent it integrally.
fn ticks(value: f64, q: f64) -> Result<u32> {
    let t = value * q;
    if t.fract() != 0.0 || t < 0.0 || t > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "value {value} does not map to whole ticks at resolution {q}"
        )));
    }
    Ok(t as u32)
}

/// Lays the aligned (note, syllable) pairs onto a tick timeline.
pub fn to_midi(
    notes: &[NoteAttributes],
    syllables: &[String],
    tempo_bpm: u32,
    resolution: u16,
) -> Result<MidiSong> {
    if notes.is_empty() {
        return Err(Error::invalid("cannot render an empty melody"));
    }
    if notes.len() != syllables.len() {
        return Err(Error::invalid(format!(
            "{} notes but {} syllables",
            notes.len(),
            syllables.len()
        )));
    }
    let song_shell = MidiSong {
        tempo_bpm,
        resolution,
        notes: vec![MidiNote {
            onset: 0,
            dur_ticks: 1,
            pitch: 0,
            velocity: NOTE_VELOCITY,
        }],
        lyrics: Vec::new(),
    };
    song_shell.validate()?;

    let q = resolution as f64;
    let mut midi_notes = Vec::with_capacity(notes.len());
    let mut lyrics = Vec::with_capacity(notes.len());
    let mut cursor = 0u32;
    for (note, syllable) in notes.iter().zip(syllables) {
        crate::corpus::validate_attributes(note.pitch as f64, note.duration, note.rest)?;
        let onset = cursor + ticks(note.rest, q)?;
        let dur_ticks = ticks(note.duration, q)?;
        midi_notes.push(MidiNote {
            onset,
            dur_ticks,
            pitch: note.pitch,
            velocity: NOTE_VELOCITY,
        });
        lyrics.push((onset, syllable.clone()));
        cursor = onset + dur_ticks;
    }
    let song = MidiSong {
        tempo_bpm,
        resolution,
        notes: midi_notes,
        lyrics,
    };
    song.validate()?;
    Ok(song)
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 5];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    while n > 1 {
        n -= 1;
        out.push(stack[n] | 0x80);
    }
    out.push(stack[0]);
}

// Same-tick ordering classes; note-offs first so retriggered pitches are
// re-struck rather than swallowed.
const ORDER_TEMPO: u8 = 0;
const ORDER_NOTE_OFF: u8 = 1;
const ORDER_LYRIC: u8 = 2;
const ORDER_NOTE_ON: u8 = 3;
const ORDER_END: u8 = 4;

/// Serializes the song as a single-track standard MIDI file.
pub fn midi_bytes(song: &MidiSong) -> Result<Vec<u8>> {
    song.validate()?;

    let mut events: Vec<(u32, u8, Vec<u8>)> = Vec::with_capacity(song.notes.len() * 3 + 2);
    let usec_per_quarter = 60_000_000u32 / song.tempo_bpm;
    let [a, b, c, d] = usec_per_quarter.to_be_bytes();
    if a != 0 {
        return Err(Error::invalid(format!(
            "tempo {} bpm does not fit a MIDI tempo event",
            song.tempo_bpm
        )));
    }
    events.push((0, ORDER_TEMPO, vec![0xff, 0x51, 0x03, b, c, d]));
    for (tick, text) in &song.lyrics {
        let bytes = text.as_bytes();
        if bytes.len() > 127 {
            return Err(Error::invalid(format!(
                "lyric {text:?} longer than 127 bytes"
            )));
        }
        let mut ev = vec![0xff, 0x05, bytes.len() as u8];
        ev.extend_from_slice(bytes);
        events.push((*tick, ORDER_LYRIC, ev));
    }
    for n in &song.notes {
        events.push((n.onset, ORDER_NOTE_ON, vec![0x90, n.pitch, n.velocity]));
        events.push((n.onset + n.dur_ticks, ORDER_NOTE_OFF, vec![0x80, n.pitch, 0]));
    }
    events.push((song.end_tick(), ORDER_END, vec![0xff, 0x2f, 0x00]));
    events.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));

    let mut track = Vec::new();
    let mut prev_tick = 0u32;
    for (tick, _, bytes) in &events {
        push_vlq(&mut track, tick - prev_tick);
        track.extend_from_slice(bytes);
        prev_tick = *tick;
    }

    let mut out = Vec::with_capacity(14 + 8 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&song.resolution.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

/// Writes the file and returns the byte count.
pub fn write_midi_file(song: &MidiSong, path: impl AsRef<Path>) -> Result<u64> {
    let bytes = midi_bytes(song)?;
    fs::write(path.as_ref(), &bytes).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(bytes.len() as u64)
}

const NOTE_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// Note name with sharps only; MIDI 60 is C4, so octave = pitch/12 - 1.
pub fn note_name(pitch: u8) -> Result<String> {
    if pitch > 127 {
        return Err(Error::invalid(format!("pitch {pitch} above 127")));
    }
    let octave = pitch as i32 / 12 - 1;
    Ok(format!("{}{}", NOTE_NAMES[pitch as usize % 12], octave))
}

/// One line per note: `syllable name+octave duration rest`.
pub fn to_text_score(notes: &[NoteAttributes], syllables: &[String]) -> Result<String> {
    if notes.len() != syllables.len() {
        return Err(Error::invalid(format!(
            "{} notes but {} syllables",
            notes.len(),
            syllables.len()
        )));
    }
    let mut out = String::new();
    for (note, syllable) in notes.iter().zip(syllables) {
        out.push_str(&format!(
            "{} {} {} {}\n",
            syllable,
            note_name(note.pitch)?,
            format_value(note.duration),
            format_value(note.rest)
        ));
    }
    Ok(out)
}
