//! Corpus BLEU over attribute class streams, plus random-sampling baselines.
//!
//! Each attribute (pitch, duration, rest) is scored as its own token stream
//! against the paired ground truth. The score is corpus-level modified
//! n-gram precision with clipping, up to 4-grams with uniform weights, and a
//! brevity penalty. Two edge rules keep short corpora well defined: orders
//! with no candidate n-grams at all are left out of the geometric mean, and
//! an order with candidate n-grams but zero matches is smoothed to
//! `1 / (2 * candidate n-gram count)`.

use crate::corpus::{
    attribute_class_value, AlignedSong, AttrKind, AttributeDistributions, NoteAttributes,
    Vocabulary,
};
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::melody::{generate_melody, DecodeMode, MelodyModel};
use crate::nn::sample_categorical;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;
use std::hash::Hash;

pub const BLEU_MAX_N: usize = 4;
/// Lyrics baseline draws uniformly from this many most-frequent syllables.
pub const BASELINE_TOP_K: usize = 50;

/// BLEU of one token stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub bleu: f64,
    /// Modified precision per order `1..=max_n`; excluded orders hold 0.
    pub precisions: Vec<f64>,
    /// Orders that entered the geometric mean: those with at least one
    /// candidate n-gram.
    pub used_orders: Vec<usize>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

/// Per-attribute scores of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub pitch: BleuScore,
    pub duration: BleuScore,
    pub rest: BleuScore,
}

impl BleuReport {
    pub fn get(&self, kind: AttrKind) -> &BleuScore {
        match kind {
            AttrKind::Pitch => &self.pitch,
            AttrKind::Duration => &self.duration,
            AttrKind::Rest => &self.rest,
        }
    }
}

fn ngram_counts<T: Eq + Hash + Clone>(seq: &[T], n: usize) -> HashMap<Vec<T>, usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for window in seq.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU of paired candidate/reference sequences.
pub fn bleu_corpus<T: Eq + Hash + Clone>(
    candidates: &[Vec<T>],
    references: &[Vec<T>],
    max_n: usize,
) -> Result<BleuScore> {
    if candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("cannot score an empty corpus"));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n must be at least 1"));
    }

    let candidate_len: usize = candidates.iter().map(Vec::len).sum();
    let reference_len: usize = references.iter().map(Vec::len).sum();
    if candidate_len == 0 {
        return Ok(BleuScore {
            bleu: 0.0,
            precisions: vec![0.0; max_n],
            used_orders: Vec::new(),
            brevity_penalty: 0.0,
            candidate_len,
            reference_len,
        });
    }

    let mut precisions = vec![0.0; max_n];
    let mut used_orders = Vec::new();
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let mut matches = 0usize;
        let mut total = 0usize;
        for (cand, reference) in candidates.iter().zip(references) {
            let cand_counts = ngram_counts(cand, n);
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in &cand_counts {
                total += count;
                matches += (*count).min(ref_counts.get(gram).copied().unwrap_or(0));
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
        precisions[n - 1] = p;
        used_orders.push(n);
        log_sum += p.ln();
    }

    let brevity_penalty = if candidate_len >= reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    };
    let bleu = if used_orders.is_empty() {
        0.0
    } else {
        brevity_penalty * (log_sum / used_orders.len() as f64).exp()
    };
    Ok(BleuScore {
        bleu,
        precisions,
        used_orders,
        brevity_penalty,
        candidate_len,
        reference_len,
    })
}

fn sample_note(
    dists: &AttributeDistributions,
    rng: &mut ChaCha8Rng,
) -> Result<NoteAttributes> {
    let pitch = sample_categorical(dists.get(AttrKind::Pitch), rng);
    let duration = sample_categorical(dists.get(AttrKind::Duration), rng);
    let rest = sample_categorical(dists.get(AttrKind::Rest), rng);
    Ok(NoteAttributes {
        pitch: attribute_class_value(AttrKind::Pitch, pitch)? as u8,
        duration: attribute_class_value(AttrKind::Duration, duration)?,
        rest: attribute_class_value(AttrKind::Rest, rest)?,
    })
}

/// Melody baseline: each attribute drawn independently per position from its
/// empirical corpus distribution. Deterministic given the seed.
pub fn baseline_melody(
    dists: &AttributeDistributions,
    length: usize,
    seed: u64,
) -> Result<Vec<NoteAttributes>> {
    if length == 0 {
        return Err(Error::invalid("baseline melody length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..length).map(|_| sample_note(dists, &mut rng)).collect()
}

/// Lyrics baseline: tokens drawn uniformly from the `top_k` most frequent
/// syllables. Deterministic given the seed.
pub fn baseline_lyrics(
    vocab: &Vocabulary,
    length: usize,
    top_k: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    if length == 0 {
        return Err(Error::invalid("baseline lyrics length must be at least 1"));
    }
    let pool = vocab.top_k_ids(top_k);
    if pool.is_empty() {
        return Err(Error::invalid(
            "vocabulary has no counted tokens to sample from",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = vec![1.0 / pool.len() as f64; pool.len()];
    Ok((0..length)
        .map(|_| pool[sample_categorical(&uniform, &mut rng)])
        .collect())
}

fn attribute_streams(notes: &[NoteAttributes]) -> [Vec<usize>; 3] {
    let mut streams: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for n in notes {
        streams[0].push(n.pitch_class());
        streams[1].push(n.duration_class());
        streams[2].push(n.rest_class());
    }
    streams
}

fn report_from_streams(
    cand: [Vec<Vec<usize>>; 3],
    refs: [Vec<Vec<usize>>; 3],
) -> Result<BleuReport> {
    Ok(BleuReport {
        pitch: bleu_corpus(&cand[0], &refs[0], BLEU_MAX_N)?,
        duration: bleu_corpus(&cand[1], &refs[1], BLEU_MAX_N)?,
        rest: bleu_corpus(&cand[2], &refs[2], BLEU_MAX_N)?,
    })
}

fn collect_refs(songs: &[AlignedSong]) -> [Vec<Vec<usize>>; 3] {
    let mut refs: [Vec<Vec<usize>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for song in songs {
        let streams = attribute_streams(song.notes());
        for (acc, s) in refs.iter_mut().zip(streams) {
            acc.push(s);
        }
    }
    refs
}

/// Greedy-decodes each test lyric and scores the three attribute streams
/// against the aligned ground truth.
pub fn evaluate_model(
    model: &MelodyModel,
    embedder: &Embedder,
    songs: &[AlignedSong],
) -> Result<BleuReport> {
    if songs.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    let mut cand: [Vec<Vec<usize>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for song in songs {
        let inputs = embedder.embed_song(song)?;
        let (notes, _) = generate_melody(model, &inputs, DecodeMode::Greedy)?;
        let streams = attribute_streams(&notes);
        for (acc, s) in cand.iter_mut().zip(streams) {
            acc.push(s);
        }
    }
    report_from_streams(cand, collect_refs(songs))
}

/// Scores the random-sampling melody baseline on the same test set, one
/// baseline melody per song with matching length.
pub fn evaluate_baseline(
    dists: &AttributeDistributions,
    songs: &[AlignedSong],
    seed: u64,
) -> Result<BleuReport> {
    if songs.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cand: [Vec<Vec<usize>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for song in songs {
        let notes: Vec<NoteAttributes> = (0..song.syllable_count())
            .map(|_| sample_note(dists, &mut rng))
            .collect::<Result<_>>()?;
        let streams = attribute_streams(&notes);
        for (acc, s) in cand.iter_mut().zip(streams) {
            acc.push(s);
        }
    }
    report_from_streams(cand, collect_refs(songs))
}
