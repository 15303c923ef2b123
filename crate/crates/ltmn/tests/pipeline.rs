//! End-to-end integration: the language model memorizes a small corpus at
//! full width, and the whole parse-embed-train-generate-score-render chain
//! runs at micro scale.

use ltmn::corpus::format_value;
use ltmn::{
    build_vocab, bleu_corpus, evaluate_baseline, evaluate_model, generate_lyric_lines,
    generate_lyrics, generate_melody, midi_bytes, next_token_distribution, parse_corpus_str,
    teacher_forced_accuracy, to_midi, train_lm, train_lm_into, train_ltmn, train_skipgram,
    AttrKind, CompositionScheme, DecodeMode, Embedder, LmConfig, LtmnTrainConfig, LyricsLm,
    SkipgramConfig, VocabLevel,
};
use ltmn::nn::argmax;

/// Five songs over disjoint syllable sets. Every token appears exactly once,
/// so each successor is unambiguous; only the five first-position choices
/// after the start marker carry irreducible uncertainty.
fn synthetic_corpus(songs: usize, syllables_per_song: usize) -> String {
    let mut text = String::new();
    let mut id = 0usize;
    for s in 0..songs {
        let mut lyrics = Vec::with_capacity(syllables_per_song);
        let mut melody = Vec::with_capacity(syllables_per_song);
        for k in 0..syllables_per_song {
            lyrics.push(format!("w{id:03}"));
            let pitch = 48 + (id * 7) % 36;
            let dur = [0.5, 1.0, 0.25, 2.0][(id + s) % 4];
            let rest = if k % 9 == 8 { 0.25 } else { 0.0 };
            melody.push(format!("{pitch}/{}/{}", format_value(dur), format_value(rest)));
            id += 1;
        }
        text.push_str(&lyrics.join(" "));
        text.push_str(" : ");
        text.push_str(&melody.join(" "));
        text.push('\n');
    }
    text
}

fn embedder_for(text: &str, scheme: CompositionScheme, dim: usize) -> (Vec<ltmn::AlignedSong>, Embedder) {
    let songs = parse_corpus_str(text).unwrap();
    let syl_vocab = build_vocab(&songs, VocabLevel::Syllable, 1).unwrap();
    let word_vocab = build_vocab(&songs, VocabLevel::Word, 1).unwrap();
    let sg = SkipgramConfig {
        dim,
        window: 2,
        negatives: 2,
        epochs: 1,
        ..SkipgramConfig::default()
    };
    let syl_stream: Vec<u32> = songs
        .iter()
        .flat_map(|s| s.syllable_tokens())
        .map(|t| syl_vocab.id(&t))
        .collect();
    let word_stream: Vec<u32> = songs
        .iter()
        .flat_map(|s| (0..s.word_count()).map(|w| word_vocab.id(&s.word_text(w))).collect::<Vec<_>>())
        .collect();
    let syl_table = train_skipgram(&syl_stream, &syl_vocab, VocabLevel::Syllable, &sg).unwrap();
    let word_table = train_skipgram(&word_stream, &word_vocab, VocabLevel::Word, &sg).unwrap();
    let embedder = Embedder::new(scheme, syl_vocab, word_vocab, syl_table, word_table).unwrap();
    (songs, embedder)
}

/// A 128-unit model driven to memorization: per-token loss under 0.1 nats
/// within 500 epochs, teacher-forced accuracy at 99 percent or better, and
/// the memorized continuations coming back out of the samplers.
#[test]
fn lm_memorizes_five_songs_at_full_width() {
    let text = synthetic_corpus(5, 85);
    let (songs, embedder) = embedder_for(&text, CompositionScheme::Se, 8);

    let cfg = LmConfig {
        hidden: 128,
        lr: 3e-3,
        lr_decay: false,
        batch: 1,
        epochs: 100,
        seed: 11,
        ..LmConfig::default()
    };
    let mut model = LyricsLm::new(
        embedder.dim(),
        cfg.hidden,
        embedder.syl_vocab.len(),
        cfg.init_scale,
        cfg.seed,
    );
    let mut final_loss = f64::INFINITY;
    let mut accuracy = 0.0;
    let mut epochs = 0;
    while epochs < 500 {
        let report = train_lm_into(&mut model, &songs, &embedder, &cfg).unwrap();
        epochs += cfg.epochs;
        final_loss = report.final_loss();
        accuracy = teacher_forced_accuracy(&model, &embedder, &songs).unwrap();
        if final_loss < 0.1 && accuracy >= 0.99 {
            break;
        }
    }
    assert!(final_loss < 0.1, "loss {final_loss} after {epochs} epochs");
    assert!(accuracy >= 0.99, "teacher-forced accuracy {accuracy} after {epochs} epochs");

    // After any three-syllable prefix the next token is forced.
    let v = &embedder.syl_vocab;
    let tokens: Vec<u32> = songs[2].syllable_tokens().iter().map(|t| v.id(t)).collect();
    let dist = next_token_distribution(&model, &embedder, &tokens[..3], 1.0).unwrap();
    assert_eq!(argmax(&dist), tokens[3] as usize, "wrong fourth syllable");

    // Sharpened sampling from a training prefix walks the memorized song.
    for (i, song) in songs.iter().enumerate() {
        let ids: Vec<u32> = song.syllable_tokens().iter().map(|t| v.id(t)).collect();
        let out = generate_lyrics(&model, &embedder, &ids[..3], 0.5, ids.len() + 4, 77 + i as u64)
            .unwrap();
        assert_eq!(out, ids, "song {i} continuation diverged");
    }
}

#[test]
fn lm_training_is_deterministic() {
    let text = synthetic_corpus(3, 12);
    let (songs, embedder) = embedder_for(&text, CompositionScheme::Se, 6);
    let cfg = LmConfig {
        hidden: 16,
        lr: 1e-2,
        lr_decay: false,
        batch: 2,
        epochs: 30,
        seed: 3,
        ..LmConfig::default()
    };
    let (_, first) = train_lm(&songs, &embedder, &cfg).unwrap();
    let (_, second) = train_lm(&songs, &embedder, &cfg).unwrap();
    assert_eq!(first.epoch_losses, second.epoch_losses, "loss curves differ across runs");
}

/// Micro run of the whole chain under the widest composition scheme: parse,
/// embed, train both networks briefly, generate a song, score it, and render
/// MIDI. Asserts shapes and invariants, not quality.
#[test]
fn full_chain_produces_a_scored_midi_song() {
    let text = "\
morn|ing dew on sil|ver grass : 60/0.5/0 62/0.5/0 64/1/0 65/0.5/0.25 67/0.5/0 69/1/0 67/2/0
qui|et river under stars : 67/1/0 65/0.5/0 64/0.5/0 62/1/0.5 60/2/0
gold|en light through au|tumn leaves : 57/0.5/0 59/0.5/0 60/1/0 62/0.5/0 64/0.5/0.25 65/1/0 64/2/0
";
    let (songs, embedder) = embedder_for(text, CompositionScheme::Cswp, 6);
    assert_eq!(embedder.dim(), 18);

    let lm_cfg = LmConfig {
        hidden: 12,
        lr: 1e-2,
        lr_decay: false,
        batch: 1,
        epochs: 80,
        seed: 4,
        ..LmConfig::default()
    };
    let (lm, lm_report) = train_lm(&songs, &embedder, &lm_cfg).unwrap();
    assert!(
        lm_report.final_loss() < lm_report.epoch_losses[0],
        "language model loss went up"
    );

    let mel_cfg = LtmnTrainConfig {
        hidden: 12,
        attn_dim: 6,
        attr_emb_dim: 4,
        lr: 5e-3,
        lr_decay: false,
        batch: 1,
        epochs: 60,
        seed: 6,
        ..LtmnTrainConfig::default()
    };
    let (melody_model, mel_report) = train_ltmn(&songs, &embedder, &mel_cfg).unwrap();
    assert!(
        mel_report.final_loss() < mel_report.epoch_losses[0],
        "melody loss went up"
    );

    // Generate two lines from a training seed and set them to music.
    let seed = [embedder.syl_vocab.id("qui|")];
    let lines = generate_lyric_lines(&lm, &embedder, &seed, 0.8, 40, 2, 9).unwrap();
    assert!(!lines.is_empty() && lines.len() <= 2);
    assert_eq!(lines[0][0], seed[0]);

    let mut all_notes = Vec::new();
    let mut all_syllables = Vec::new();
    for line in &lines {
        if line.is_empty() {
            continue;
        }
        let inputs = embedder.embed_stream(line).unwrap();
        let (notes, trace) = generate_melody(&melody_model, &inputs, DecodeMode::Greedy).unwrap();
        assert_eq!(notes.len(), line.len(), "one note per syllable");
        assert_eq!(trace.alpha.len(), line.len());
        for alpha in &trace.alpha {
            let total: f64 = alpha.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
        for (note, &tok) in notes.iter().zip(line.iter()) {
            ltmn::validate_attributes(note.pitch as f64, note.duration, note.rest).unwrap();
            all_syllables.push(embedder.syl_vocab.token(tok).unwrap().trim_end_matches('|').to_string());
            all_notes.push(*note);
        }
    }

    let midi = to_midi(&all_notes, &all_syllables, 120, 480).unwrap();
    let bytes = midi_bytes(&midi).unwrap();
    assert_eq!(&bytes[..4], b"MThd");
    assert_eq!(midi.notes.len(), all_notes.len());

    // Scoring hooks accept the generated material and stay inside [0, 1].
    let report = evaluate_model(&melody_model, &embedder, &songs).unwrap();
    let dists = ltmn::attribute_distribution(&songs).unwrap();
    let base = evaluate_baseline(&dists, &songs, 13).unwrap();
    for kind in AttrKind::ALL {
        let m = report.get(kind).bleu;
        let b = base.get(kind).bleu;
        assert!((0.0..=1.0).contains(&m), "{} model BLEU {m}", kind.name());
        assert!((0.0..=1.0).contains(&b), "{} baseline BLEU {b}", kind.name());
    }

    // Self-comparison sanity for the scorer on real token streams.
    let pitch_refs: Vec<Vec<u32>> = songs
        .iter()
        .map(|s| s.notes().iter().map(|n| n.pitch as u32).collect())
        .collect();
    let self_bleu = bleu_corpus(&pitch_refs, &pitch_refs, 4).unwrap().bleu;
    assert_eq!(self_bleu, 1.0);
}
