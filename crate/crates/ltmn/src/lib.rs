//! Lyrics-to-melody network (LTMN).
//!
//! A desk-scale pipeline that learns to compose a melody for a lyric line,
//! one note per syllable:
//!
//! 1. [`corpus`] parses aligned `lyrics : pitch/duration/rest` songs and
//!    builds syllable- and word-level vocabularies.
//! 2. [`embedding`] trains skip-gram embeddings for both levels and combines
//!    them under four composition schemes.
//! 3. [`lyrics_lm`] is an LSTM language model over syllable tokens with
//!    temperature sampling.
//! 4. [`melody`] is an attention-based encoder-decoder that emits pitch,
//!    duration, and rest classes per syllable.
//! 5. [`eval`] scores generated attribute streams with corpus BLEU against
//!    references and random baselines.
//! 6. [`midi`] renders generated songs to standard MIDI files and plain-text
//!    scores.
//!
//! All gradients are written by hand and verified against central finite
//! differences; every random choice flows through a seeded generator so runs
//! are bit-reproducible.

pub mod checkpoint;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod lyrics_lm;
pub mod melody;
pub mod midi;
pub mod nn;

pub use checkpoint::{
    lyrics_lm_checkpoint, lyrics_lm_from_checkpoint, melody_checkpoint, melody_from_checkpoint,
    Checkpoint,
};
pub use corpus::{
    attribute_class_index, attribute_class_value, attribute_distribution, build_lexicon,
    build_vocab, format_value, parse_corpus, parse_corpus_str, serialize_corpus, serialize_song,
    validate_attributes, AlignedSong, AttrKind, AttributeDistributions, NoteAttributes,
    VocabLevel, Vocabulary,
};
pub use embedding::{
    compose, composed_dim, regroup_words, train_skipgram, CompositionScheme, Embedder,
    EmbeddingTable, SkipgramConfig, StreamEmbedder,
};
pub use error::{Error, Result};
pub use eval::{
    baseline_lyrics, baseline_melody, bleu_corpus, evaluate_baseline, evaluate_model, BleuReport,
    BleuScore, BASELINE_TOP_K, BLEU_MAX_N,
};
pub use lyrics_lm::{
    generate_lyric_lines, generate_lyrics, lm_loss, lm_song_grads, lm_song_loss,
    next_token_distribution, teacher_forced_accuracy, train_lm, train_lm_into, LmConfig,
    LmTrainReport, LyricsLm,
};
pub use melody::{
    attend, encode, generate_melody, ltmn_grads, ltmn_loss, song_note_classes, train_ltmn,
    train_ltmn_into, AttentionParams, AttentionTrace, DecodeMode, EncoderStates, LtmnTrainConfig,
    LtmnTrainReport, MelodyConfig, MelodyModel,
};
pub use midi::{
    midi_bytes, note_name, to_midi, to_text_score, write_midi_file, MidiNote, MidiSong,
    DEFAULT_RESOLUTION, DEFAULT_TEMPO_BPM, NOTE_VELOCITY,
};
pub use nn::{Matrix, Tensors};
