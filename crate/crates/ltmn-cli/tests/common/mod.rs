//! Independent oracles for the acceptance suite. Both are written from the
//! definitions alone and share no code with the library: BLEU counts n-grams
//! by direct slice comparison instead of hashing, and the MIDI reader decodes
//! the byte stream event by event instead of reusing the writer's tables.

/// Occurrences of `gram` in `seq` counted by scanning every window.
fn occurrences(seq: &[u32], gram: &[u32]) -> usize {
    if gram.len() > seq.len() {
        return 0;
    }
    (0..=seq.len() - gram.len())
        .filter(|&i| &seq[i..i + gram.len()] == gram)
        .count()
}

/// Corpus-level BLEU by brute force: clipped n-gram matches are counted by
/// enumerating each candidate's distinct n-grams with nested scans.
pub fn oracle_bleu(candidates: &[Vec<u32>], references: &[Vec<u32>], max_n: usize) -> f64 {
    assert_eq!(candidates.len(), references.len());
    let cand_total: usize = candidates.iter().map(Vec::len).sum();
    let ref_total: usize = references.iter().map(Vec::len).sum();
    if cand_total == 0 {
        return 0.0;
    }

    let mut log_sum = 0.0;
    let mut used = 0usize;
    for n in 1..=max_n {
        let mut total = 0usize;
        let mut matches = 0usize;
        for (cand, reference) in candidates.iter().zip(references) {
            if cand.len() < n {
                continue;
            }
            total += cand.len() - n + 1;
            for start in 0..=cand.len() - n {
                let gram = &cand[start..start + n];
                // Count each distinct n-gram once, at its first position.
                if (0..start).any(|e| &cand[e..e + n] == gram) {
                    continue;
                }
                matches += occurrences(cand, gram).min(occurrences(reference, gram));
            }
        }
        if total == 0 {
            continue;
        }
        let p = if matches == 0 {
            1.0 / (2.0 * total as f64)
        } else {
            matches as f64 / total as f64
        };
        log_sum += p.ln();
        used += 1;
    }
    if used == 0 {
        return 0.0;
    }
    let brevity = if cand_total >= ref_total {
        1.0
    } else {
        (1.0 - ref_total as f64 / cand_total as f64).exp()
    };
    brevity * (log_sum / used as f64).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedNote {
    pub onset: u32,
    pub dur_ticks: u32,
    pub pitch: u8,
    pub velocity: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedMidi {
    pub format: u16,
    pub ntracks: u16,
    pub division: u16,
    pub tempo_us_per_quarter: Option<u32>,
    pub notes: Vec<ParsedNote>,
    pub lyrics: Vec<(u32, String)>,
    pub end_tick: Option<u32>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.pos + n > self.bytes.len() {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, String> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, String> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32, String> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let byte = self.u8()?;
            value = (value << 7) | u32::from(byte & 0x7f);
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err("variable-length quantity longer than 4 bytes".into())
    }
}

/// Strict reader for the subset of standard MIDI the pipeline emits: one
/// format-0 track of tempo, lyric, note on/off, and end-of-track events,
/// every event carrying an explicit status byte. Anything else is an error.
pub fn parse_midi(bytes: &[u8]) -> Result<ParsedMidi, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != b"MThd" {
        return Err("missing MThd".into());
    }
    if r.u32()? != 6 {
        return Err("header length is not 6".into());
    }
    let mut parsed = ParsedMidi {
        format: r.u16()?,
        ntracks: r.u16()?,
        division: r.u16()?,
        ..ParsedMidi::default()
    };
    if parsed.division & 0x8000 != 0 {
        return Err("SMPTE division is not supported".into());
    }

    if r.take(4)? != b"MTrk" {
        return Err("missing MTrk".into());
    }
    let track_len = r.u32()? as usize;
    let track_end = r.pos + track_len;

    let mut tick: u32 = 0;
    let mut open: Vec<(u8, u32, u8)> = Vec::new(); // pitch, onset, velocity
    let mut ended = false;
    while r.pos < track_end {
        if ended {
            return Err("event after end of track".into());
        }
        tick += r.vlq()?;
        let status = r.u8()?;
        match status {
            0xff => {
                let meta = r.u8()?;
                let len = r.vlq()? as usize;
                let data = r.take(len)?;
                match meta {
                    0x51 => {
                        if data.len() != 3 {
                            return Err("tempo event is not 3 bytes".into());
                        }
                        parsed.tempo_us_per_quarter = Some(
                            (u32::from(data[0]) << 16) | (u32::from(data[1]) << 8) | u32::from(data[2]),
                        );
                    }
                    0x05 => {
                        let text = String::from_utf8(data.to_vec())
                            .map_err(|_| "lyric is not UTF-8".to_string())?;
                        parsed.lyrics.push((tick, text));
                    }
                    0x2f => {
                        if len != 0 {
                            return Err("end of track carries data".into());
                        }
                        parsed.end_tick = Some(tick);
                        ended = true;
                    }
                    other => return Err(format!("unexpected meta type {other:#04x}")),
                }
            }
            0x90 => {
                let pitch = r.u8()?;
                let velocity = r.u8()?;
                if velocity == 0 {
                    return Err("note on with zero velocity".into());
                }
                open.push((pitch, tick, velocity));
            }
            0x80 => {
                let pitch = r.u8()?;
                let _release = r.u8()?;
                let slot = open
                    .iter()
                    .position(|&(p, _, _)| p == pitch)
                    .ok_or_else(|| format!("note off for silent pitch {pitch}"))?;
                let (_, onset, velocity) = open.remove(slot);
                parsed.notes.push(ParsedNote {
                    onset,
                    dur_ticks: tick - onset,
                    pitch,
                    velocity,
                });
            }
            other => return Err(format!("unexpected status byte {other:#04x}")),
        }
    }
    if r.pos != track_end {
        return Err("event ran past the declared track length".into());
    }
    if r.pos != bytes.len() {
        return Err("bytes after the track".into());
    }
    if !ended {
        return Err("track has no end-of-track event".into());
    }
    if !open.is_empty() {
        return Err(format!("{} notes never released", open.len()));
    }
    parsed.notes.sort_by_key(|n| n.onset);
    Ok(parsed)
}
