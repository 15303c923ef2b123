//! Implementations of the pipeline subcommands.
//!
//! Every command that writes artifacts resolves the same run directory from
//! the config hash and records the hashed settings in `config.txt` there, so
//! a directory is always self-describing. Output files never embed
//! timestamps or absolute paths: rerunning a command with the same config
//! and seed reproduces every artifact byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ltmn::{
    attribute_class_value, attribute_distribution, baseline_lyrics, baseline_melody, build_lexicon,
    build_vocab, evaluate_baseline, evaluate_model, format_value, generate_lyric_lines,
    generate_melody, lyrics_lm_from_checkpoint, melody_from_checkpoint, parse_corpus,
    regroup_words, teacher_forced_accuracy, to_midi, to_text_score, train_skipgram,
    write_midi_file, AlignedSong, AttrKind, Checkpoint, CompositionScheme, DecodeMode, Embedder,
    EmbeddingTable, Error, LmConfig, LtmnTrainConfig, SkipgramConfig, VocabLevel, Vocabulary,
};

use crate::config::RunConfig;
use crate::CliError;

type CmdResult = Result<(), CliError>;

fn vocab_path(dir: &Path, level: VocabLevel) -> PathBuf {
    dir.join(format!("vocab_{}.tsv", level.name()))
}

fn emb_path(dir: &Path, level: VocabLevel) -> PathBuf {
    dir.join(format!("emb_{}.txt", level.name()))
}

fn lexicon_path(dir: &Path) -> PathBuf {
    dir.join("lexicon.tsv")
}

fn lm_path(dir: &Path, scheme: CompositionScheme) -> PathBuf {
    dir.join(format!("lm_{}.ckpt", scheme.name()))
}

fn ltmn_path(dir: &Path, scheme: CompositionScheme) -> PathBuf {
    dir.join(format!("ltmn_{}.ckpt", scheme.name()))
}

/// Fails with the artifact exit code when a pipeline file does not exist.
fn require(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Missing(path))
    }
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| CliError::Data(Error::io(path, e)))
}

fn corpus_songs(cfg: &RunConfig) -> Result<Vec<AlignedSong>, CliError> {
    if cfg.corpus.is_empty() {
        return Err(CliError::Usage("config key corpus must be set".into()));
    }
    Ok(parse_corpus(&cfg.corpus)?)
}

fn prepare_run_dir(cfg: &RunConfig, root: &Path) -> Result<PathBuf, CliError> {
    let dir = cfg.run_dir(root);
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(Error::io(&dir, e)))?;
    write_text(&dir.join("config.txt"), &cfg.canonical())?;
    Ok(dir)
}

fn load_embedder(dir: &Path, scheme: CompositionScheme) -> Result<Embedder, CliError> {
    let syl_vocab = Vocabulary::load(require(vocab_path(dir, VocabLevel::Syllable))?)?;
    let word_vocab = Vocabulary::load(require(vocab_path(dir, VocabLevel::Word))?)?;
    let syl_table = EmbeddingTable::load(
        require(emb_path(dir, VocabLevel::Syllable))?,
        &syl_vocab,
        VocabLevel::Syllable,
    )?;
    let word_table = EmbeddingTable::load(
        require(emb_path(dir, VocabLevel::Word))?,
        &word_vocab,
        VocabLevel::Word,
    )?;
    Ok(Embedder::new(scheme, syl_vocab, word_vocab, syl_table, word_table)?)
}

fn load_checkpoint(path: PathBuf) -> Result<Checkpoint, CliError> {
    Ok(Checkpoint::load(require(path)?)?)
}

/// Scheme recorded inside a checkpoint must match the file name it came from.
fn check_scheme(found: CompositionScheme, expected: CompositionScheme) -> CmdResult {
    if found != expected {
        return Err(CliError::Data(Error::checkpoint(format!(
            "checkpoint was trained with scheme {} but this run expects {}",
            found.name(),
            expected.name()
        ))));
    }
    Ok(())
}

/// Token stream for one embedding level: each song contributes its tokens
/// between start and end markers, so the markers receive trained vectors.
fn level_stream(songs: &[AlignedSong], vocab: &Vocabulary, level: VocabLevel) -> Vec<u32> {
    let mut out = Vec::new();
    for song in songs {
        out.push(Vocabulary::BOS);
        match level {
            VocabLevel::Syllable => {
                out.extend(song.syllable_tokens().iter().map(|t| vocab.id(t)));
            }
            VocabLevel::Word => {
                out.extend((0..song.word_count()).map(|w| vocab.id(&song.word_text(w))));
            }
        }
        out.push(Vocabulary::EOS);
    }
    out
}

fn display_syllable(vocab: &Vocabulary, id: u32) -> Result<String, CliError> {
    let token = vocab.token(id)?;
    Ok(token.strip_suffix('|').unwrap_or(token).to_string())
}

pub fn parse(cfg: &RunConfig) -> CmdResult {
    let songs = corpus_songs(cfg)?;
    let syl_vocab = build_vocab(&songs, VocabLevel::Syllable, cfg.min_count)?;
    let word_vocab = build_vocab(&songs, VocabLevel::Word, cfg.min_count)?;
    let syllables: usize = songs.iter().map(|s| s.syllable_count()).sum();
    let words: usize = songs.iter().map(|s| s.word_count()).sum();
    println!("songs={}", songs.len());
    println!("syllables={syllables}");
    println!("words={words}");
    println!("syllable_vocab={}", syl_vocab.len());
    println!("word_vocab={}", word_vocab.len());
    let dists = attribute_distribution(&songs)?;
    for kind in AttrKind::ALL {
        for (class, &p) in dists.get(kind).iter().enumerate() {
            if p > 0.0 {
                let value = attribute_class_value(kind, class)?;
                println!("hist_{}_{}={p}", kind.name(), format_value(value));
            }
        }
    }
    Ok(())
}

pub fn train_emb(cfg: &RunConfig, root: &Path) -> CmdResult {
    let songs = corpus_songs(cfg)?;
    let syl_vocab = build_vocab(&songs, VocabLevel::Syllable, cfg.min_count)?;
    let word_vocab = build_vocab(&songs, VocabLevel::Word, cfg.min_count)?;
    let sg = SkipgramConfig {
        dim: cfg.dim,
        window: cfg.window,
        negatives: cfg.negatives,
        alpha: cfg.alpha,
        lr_initial: cfg.emb_lr,
        lr_final: cfg.emb_lr_final,
        epochs: cfg.emb_epochs,
        seed: cfg.seed,
    };
    let syl_stream = level_stream(&songs, &syl_vocab, VocabLevel::Syllable);
    let syl_table = train_skipgram(&syl_stream, &syl_vocab, VocabLevel::Syllable, &sg)?;
    let word_stream = level_stream(&songs, &word_vocab, VocabLevel::Word);
    let word_sg = SkipgramConfig {
        seed: cfg.seed.wrapping_add(1),
        ..sg.clone()
    };
    let word_table = train_skipgram(&word_stream, &word_vocab, VocabLevel::Word, &word_sg)?;

    let dir = prepare_run_dir(cfg, root)?;
    syl_vocab.save(vocab_path(&dir, VocabLevel::Syllable))?;
    word_vocab.save(vocab_path(&dir, VocabLevel::Word))?;
    syl_table.save(&syl_vocab, emb_path(&dir, VocabLevel::Syllable))?;
    word_table.save(&word_vocab, emb_path(&dir, VocabLevel::Word))?;

    // The lexicon lets compose turn seed words back into syllable tokens.
    let lexicon: BTreeMap<String, Vec<String>> = build_lexicon(&songs).into_iter().collect();
    let mut text = String::new();
    for (word, tokens) in &lexicon {
        let _ = writeln!(text, "{word}\t{}", tokens.join(" "));
    }
    write_text(&lexicon_path(&dir), &text)?;

    println!("run_dir={}", dir.display());
    println!("syllable_vocab={}", syl_vocab.len());
    println!("word_vocab={}", word_vocab.len());
    println!("dim={}", cfg.dim);
    println!("lexicon_words={}", lexicon.len());
    Ok(())
}

pub fn train_lm(cfg: &RunConfig, root: &Path) -> CmdResult {
    let songs = corpus_songs(cfg)?;
    let dir = prepare_run_dir(cfg, root)?;
    let embedder = load_embedder(&dir, cfg.scheme)?;
    let lm_cfg = LmConfig {
        hidden: cfg.hidden,
        lr: cfg.lr,
        lr_decay: cfg.lr_decay,
        batch: cfg.batch,
        epochs: cfg.lm_epochs,
        init_scale: cfg.init_scale,
        seed: cfg.seed,
        ..LmConfig::default()
    };
    let (model, report) = ltmn::train_lm(&songs, &embedder, &lm_cfg)?;
    let path = lm_path(&dir, cfg.scheme);
    ltmn::lyrics_lm_checkpoint(&model, cfg.scheme).save(&path)?;
    let accuracy = teacher_forced_accuracy(&model, &embedder, &songs)?;
    println!("run_dir={}", dir.display());
    println!("scheme={}", cfg.scheme.name());
    println!("epochs={}", lm_cfg.epochs);
    println!("final_loss={}", report.final_loss());
    println!("accuracy={accuracy}");
    println!("checkpoint={}", path.display());
    Ok(())
}

pub fn train_ltmn(cfg: &RunConfig, root: &Path) -> CmdResult {
    let songs = corpus_songs(cfg)?;
    let dir = prepare_run_dir(cfg, root)?;
    let embedder = load_embedder(&dir, cfg.scheme)?;
    let train_cfg = LtmnTrainConfig {
        hidden: cfg.hidden,
        attn_dim: cfg.attn_dim,
        attr_emb_dim: cfg.attr_emb_dim,
        lr: cfg.lr,
        lr_decay: cfg.lr_decay,
        batch: cfg.batch,
        epochs: cfg.ltmn_epochs,
        init_scale: cfg.init_scale,
        seed: cfg.seed,
        ..LtmnTrainConfig::default()
    };
    let (model, report) = ltmn::train_ltmn(&songs, &embedder, &train_cfg)?;
    let path = ltmn_path(&dir, cfg.scheme);
    ltmn::melody_checkpoint(&model, cfg.scheme).save(&path)?;
    println!("run_dir={}", dir.display());
    println!("scheme={}", cfg.scheme.name());
    println!("epochs={}", train_cfg.epochs);
    println!("final_loss={}", report.final_loss());
    println!("checkpoint={}", path.display());
    Ok(())
}

fn load_lexicon(dir: &Path) -> Result<BTreeMap<String, Vec<String>>, CliError> {
    let path = require(lexicon_path(dir))?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::Data(Error::io(&path, e)))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let (word, tokens) = line.split_once('\t').ok_or_else(|| {
            CliError::Data(Error::invalid(format!("lexicon line without a tab: {line:?}")))
        })?;
        map.insert(
            word.to_string(),
            tokens.split(' ').map(str::to_string).collect(),
        );
    }
    Ok(map)
}

/// Maps seed words to syllable token ids via the training lexicon. Words the
/// lexicon has never seen fall back to a single-syllable vocabulary lookup,
/// then to the unknown id with a warning.
fn seed_tokens(vocab: &Vocabulary, lexicon: &BTreeMap<String, Vec<String>>, text: &str) -> Vec<u32> {
    let mut ids = Vec::new();
    for word in text.split_whitespace() {
        if let Some(tokens) = lexicon.get(word) {
            ids.extend(tokens.iter().map(|t| vocab.id(t)));
        } else if let Some(id) = vocab.lookup(word) {
            ids.push(id);
        } else {
            eprintln!("warning: seed word {word:?} is not in the vocabulary");
            ids.push(Vocabulary::UNK);
        }
    }
    ids
}

pub fn compose(cfg: &RunConfig, root: &Path, seed_text: &str) -> CmdResult {
    let dir = prepare_run_dir(cfg, root)?;
    let embedder = load_embedder(&dir, cfg.scheme)?;
    let lexicon = load_lexicon(&dir)?;
    let (lm, lm_scheme) = lyrics_lm_from_checkpoint(&load_checkpoint(lm_path(&dir, cfg.scheme))?)?;
    check_scheme(lm_scheme, cfg.scheme)?;
    let (melody, melody_scheme) =
        melody_from_checkpoint(&load_checkpoint(ltmn_path(&dir, cfg.scheme))?)?;
    check_scheme(melody_scheme, cfg.scheme)?;

    let seed = seed_tokens(&embedder.syl_vocab, &lexicon, seed_text);
    let lines = generate_lyric_lines(
        &lm, &embedder, &seed, cfg.tau, cfg.max_len, cfg.lines, cfg.seed,
    )?;

    let mut lyric_text = String::new();
    let mut tsv = String::new();
    let mut attn_text = String::new();
    let mut all_notes = Vec::new();
    let mut all_syllables = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let words = regroup_words(&embedder.syl_vocab, line)?;
        let _ = writeln!(lyric_text, "{}", words.join(" "));
        if line.is_empty() {
            continue;
        }
        let inputs = embedder.embed_stream(line)?;
        let mode = if cfg.melody_sample {
            DecodeMode::Sample {
                tau: cfg.tau,
                seed: cfg.seed.wrapping_add(i as u64),
            }
        } else {
            DecodeMode::Greedy
        };
        let (notes, trace) = generate_melody(&melody, &inputs, mode)?;
        let _ = writeln!(attn_text, "# line {}", i + 1);
        for row in &trace.alpha {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(attn_text, "{}", cells.join(" "));
        }
        for (&t, note) in line.iter().zip(&notes) {
            let syllable = display_syllable(&embedder.syl_vocab, t)?;
            let _ = writeln!(
                tsv,
                "{syllable}\t{}\t{}\t{}",
                note.pitch,
                format_value(note.duration),
                format_value(note.rest)
            );
            all_syllables.push(syllable);
        }
        all_notes.extend(notes);
    }
    if all_notes.is_empty() {
        return Err(CliError::Data(Error::invalid(
            "generation produced no syllables; raise max_len or soften the seed",
        )));
    }

    let scheme = cfg.scheme.name();
    let lyrics_file = dir.join(format!("lyrics_{scheme}.txt"));
    let melody_file = dir.join(format!("melody_{scheme}.tsv"));
    let attn_file = dir.join(format!("attention_{scheme}.txt"));
    let score_file = dir.join(format!("score_{scheme}.txt"));
    let midi_file = dir.join(format!("song_{scheme}.mid"));
    write_text(&lyrics_file, &lyric_text)?;
    write_text(&melody_file, &tsv)?;
    write_text(&attn_file, &attn_text)?;
    write_text(&score_file, &to_text_score(&all_notes, &all_syllables)?)?;
    let song = to_midi(&all_notes, &all_syllables, cfg.tempo, cfg.resolution)?;
    write_midi_file(&song, &midi_file)?;

    println!("run_dir={}", dir.display());
    println!("scheme={scheme}");
    println!("lines={}", lines.len());
    println!("notes={}", all_notes.len());
    println!("lyrics={}", lyrics_file.display());
    println!("melody={}", melody_file.display());
    println!("attention={}", attn_file.display());
    println!("score={}", score_file.display());
    println!("midi={}", midi_file.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, root: &Path, testset: Option<&Path>) -> CmdResult {
    let dir = prepare_run_dir(cfg, root)?;
    let test_path = match testset {
        Some(p) => p.to_path_buf(),
        None => {
            if cfg.corpus.is_empty() {
                return Err(CliError::Usage(
                    "config key corpus must be set or --testset given".into(),
                ));
            }
            PathBuf::from(&cfg.corpus)
        }
    };
    let songs = parse_corpus(&test_path)?;
    let dists = attribute_distribution(&songs)?;

    let mut rows = Vec::new();
    let mut report = BTreeMap::new();
    for scheme in CompositionScheme::ALL {
        let path = ltmn_path(&dir, scheme);
        if !path.is_file() {
            continue;
        }
        let embedder = load_embedder(&dir, scheme)?;
        let (model, ckpt_scheme) = melody_from_checkpoint(&Checkpoint::load(&path)?)?;
        check_scheme(ckpt_scheme, scheme)?;
        let model_scores = evaluate_model(&model, &embedder, &songs)?;
        let baseline_scores = evaluate_baseline(&dists, &songs, cfg.seed)?;
        for kind in AttrKind::ALL {
            rows.push((
                scheme.name(),
                kind.name(),
                model_scores.get(kind).bleu,
                baseline_scores.get(kind).bleu,
            ));
        }
        report.insert(
            scheme.name().to_string(),
            serde_json::json!({ "model": model_scores, "baseline": baseline_scores }),
        );
    }
    if rows.is_empty() {
        return Err(CliError::Missing(ltmn_path(&dir, cfg.scheme)));
    }

    println!("{:<7} {:<9} {:>12} {:>13}", "scheme", "attribute", "model_bleu", "baseline_bleu");
    for (scheme, attr, model_bleu, baseline_bleu) in rows {
        println!("{scheme:<7} {attr:<9} {model_bleu:>12.6} {baseline_bleu:>13.6}");
    }

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Data(Error::invalid(format!("cannot serialize report: {e}"))))?;
    let report_path = dir.join("report.json");
    write_text(&report_path, &(json + "\n"))?;
    println!("report={}", report_path.display());
    Ok(())
}

pub fn baseline(cfg: &RunConfig, root: &Path) -> CmdResult {
    let songs = corpus_songs(cfg)?;
    let dir = prepare_run_dir(cfg, root)?;
    let vocab = build_vocab(&songs, VocabLevel::Syllable, cfg.min_count)?;
    let dists = attribute_distribution(&songs)?;
    let total: usize = songs.iter().map(|s| s.syllable_count()).sum();
    let length = ((total as f64 / songs.len() as f64).round() as usize).max(1);

    let mut lyric_text = String::new();
    let mut tsv = String::new();
    for i in 0..cfg.lines {
        let tokens = baseline_lyrics(&vocab, length, cfg.top_k, cfg.seed.wrapping_add(i as u64))?;
        let words = regroup_words(&vocab, &tokens)?;
        let _ = writeln!(lyric_text, "{}", words.join(" "));
        let notes = baseline_melody(&dists, length, cfg.seed.wrapping_add(1000 + i as u64))?;
        for (&t, note) in tokens.iter().zip(&notes) {
            let _ = writeln!(
                tsv,
                "{}\t{}\t{}\t{}",
                display_syllable(&vocab, t)?,
                note.pitch,
                format_value(note.duration),
                format_value(note.rest)
            );
        }
    }
    let lyrics_file = dir.join("baseline_lyrics.txt");
    let melody_file = dir.join("baseline_melody.tsv");
    write_text(&lyrics_file, &lyric_text)?;
    write_text(&melody_file, &tsv)?;

    println!("run_dir={}", dir.display());
    println!("lines={}", cfg.lines);
    println!("length={length}");
    println!("lyrics={}", lyrics_file.display());
    println!("melody={}", melody_file.display());
    Ok(())
}
