//! LSTM language model over marked syllable tokens.
//!
//! Input vectors come from a frozen [`Embedder`]; only the LSTM and the
//! output projection train. Each song becomes one teacher-forced sequence
//! `<bos> s_1 .. s_T -> s_1 .. s_T <eos>`, so the end marker doubles as the
//! end of a lyric line and sampling across it yields multi-line lyrics.

use crate::corpus::{AlignedSong, Vocabulary};
use crate::embedding::{Embedder, StreamEmbedder};
use crate::error::{Error, Result};
use crate::nn::{
    self, argmax, clip_global_norm, lr_schedule, lstm_step_backward, lstm_step_cached,
    sample_categorical, softmax_ce_grad, softmax_with_temperature, AdamState, LstmParams,
    LstmStepCache, Matrix, Tensors,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct LmConfig {
    pub hidden: usize,
    pub lr: f64,
    /// Apply the stepped decay schedule on top of `lr`.
    pub lr_decay: bool,
    pub batch: usize,
    pub epochs: usize,
    pub clip_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            hidden: nn::DEFAULT_HIDDEN,
            lr: 1e-4,
            lr_decay: true,
            batch: 32,
            epochs: 200,
            clip_norm: 5.0,
            init_scale: 0.08,
            seed: 1,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "hidden size, batch size, and epochs must all be at least 1",
            ));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return Err(Error::invalid(format!(
                "clip norm must be > 0, got {}",
                self.clip_norm
            )));
        }
        Ok(())
    }
}

/// The trainable language-model parameters. `embed_dim` is the composed
/// input width the paired embedder must produce.
#[derive(Debug, Clone, PartialEq)]
pub struct LyricsLm {
    pub embed_dim: usize,
    pub hidden: usize,
    pub vocab_size: usize,
    pub lstm: LstmParams,
    pub proj_w: Matrix,
    pub proj_b: Matrix,
}

impl LyricsLm {
    pub fn new(embed_dim: usize, hidden: usize, vocab_size: usize, init_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LyricsLm {
            embed_dim,
            hidden,
            vocab_size,
            lstm: LstmParams::uniform(embed_dim, hidden, init_scale, &mut rng),
            proj_w: Matrix::uniform(vocab_size, hidden, -init_scale, init_scale, &mut rng),
            proj_b: Matrix::zeros(vocab_size, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LyricsLm {
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            vocab_size: self.vocab_size,
            lstm: self.lstm.zeros_like(),
            proj_w: Matrix::zeros(self.vocab_size, self.hidden),
            proj_b: Matrix::zeros(self.vocab_size, 1),
        }
    }

    /// The projection width must equal the vocabulary and the input width
    /// must equal the embedder's composed width.
    pub fn check_compatible(&self, embedder: &Embedder) -> Result<()> {
        if self.embed_dim != embedder.dim() {
            return Err(Error::shape(format!(
                "model expects {}-dim inputs but embedder produces {}",
                self.embed_dim,
                embedder.dim()
            )));
        }
        if self.vocab_size != embedder.syl_vocab.len() {
            return Err(Error::shape(format!(
                "model predicts over {} tokens but vocabulary has {}",
                self.vocab_size,
                embedder.syl_vocab.len()
            )));
        }
        Ok(())
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.proj_b.data().to_vec();
        self.proj_w.mul_vec_acc(h, &mut out);
        out
    }
}

impl Tensors for LyricsLm {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        self.lstm.visit(&nn::join_name(prefix, "lstm"), out);
        out.push((nn::join_name(prefix, "proj_w"), &self.proj_w));
        out.push((nn::join_name(prefix, "proj_b"), &self.proj_b));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        self.lstm.visit_mut(&nn::join_name(prefix, "lstm"), out);
        out.push((nn::join_name(prefix, "proj_w"), &mut self.proj_w));
        out.push((nn::join_name(prefix, "proj_b"), &mut self.proj_b));
    }
}

/// Token ids of one song's teacher-forcing targets: the syllables then the
/// end marker.
pub fn song_targets(vocab: &Vocabulary, song: &AlignedSong) -> Vec<u32> {
    let mut ids: Vec<u32> = song
        .syllable_tokens()
        .iter()
        .map(|t| vocab.id(t))
        .collect();
    ids.push(Vocabulary::EOS);
    ids
}

/// Input vectors of one song: the begin marker followed by every syllable
/// composed with its full word.
fn song_inputs(embedder: &Embedder, song: &AlignedSong) -> Result<Vec<Vec<f64>>> {
    let mut inputs = Vec::with_capacity(song.syllable_count() + 1);
    inputs.push(embedder.embed(Vocabulary::BOS, None)?);
    inputs.extend(embedder.embed_song(song)?);
    Ok(inputs)
}

struct SongForward {
    caches: Vec<LstmStepCache>,
    logit_steps: Vec<Vec<f64>>,
    loss: f64,
}

fn forward_song(model: &LyricsLm, inputs: &[Vec<f64>], targets: &[u32]) -> Result<SongForward> {
    let mut h = vec![0.0; model.hidden];
    let mut c = vec![0.0; model.hidden];
    let mut caches = Vec::with_capacity(inputs.len());
    let mut logit_steps = Vec::with_capacity(inputs.len());
    let mut loss = 0.0;
    for (x, &target) in inputs.iter().zip(targets) {
        let cache = lstm_step_cached(&model.lstm, x, &h, &c)?;
        h = cache.h();
        c = cache.c.clone();
        let logits = model.logits(&h);
        let (l, _) = softmax_ce_grad(&logits, target as usize)?;
        loss += l;
        caches.push(cache);
        logit_steps.push(logits);
    }
    Ok(SongForward {
        caches,
        logit_steps,
        loss,
    })
}

/// Accumulates gradients of the summed token losses, scaled by `scale`.
fn backward_song(
    model: &LyricsLm,
    grads: &mut LyricsLm,
    fwd: &SongForward,
    targets: &[u32],
    scale: f64,
) -> Result<()> {
    let mut carry_dh = vec![0.0; model.hidden];
    let mut carry_dc = vec![0.0; model.hidden];
    for t in (0..fwd.caches.len()).rev() {
        let (_, mut dlogits) = softmax_ce_grad(&fwd.logit_steps[t], targets[t] as usize)?;
        for g in &mut dlogits {
            *g *= scale;
        }
        let h = fwd.caches[t].h();
        grads.proj_w.add_outer(&dlogits, &h);
        for (b, g) in grads.proj_b.data_mut().iter_mut().zip(&dlogits) {
            *b += g;
        }
        let mut dh = carry_dh;
        model.proj_w.mul_t_vec_acc(&dlogits, &mut dh);
        let (_, dh_prev, dc_prev) =
            lstm_step_backward(&model.lstm, &mut grads.lstm, &fwd.caches[t], &dh, &carry_dc);
        carry_dh = dh_prev;
        carry_dc = dc_prev;
    }
    Ok(())
}

/// Per-epoch mean loss in nats per predicted token.
#[derive(Debug, Clone)]
pub struct LmTrainReport {
    pub epoch_losses: Vec<f64>,
}

impl LmTrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().unwrap_or(&f64::NAN)
    }
}

/// Trains a language model on the corpus with teacher forcing, Adam, and
/// global-norm clipping. Deterministic for a fixed config.
pub fn train_lm(
    songs: &[AlignedSong],
    embedder: &Embedder,
    cfg: &LmConfig,
) -> Result<(LyricsLm, LmTrainReport)> {
    cfg.validate()?;
    if songs.is_empty() {
        return Err(Error::invalid("cannot train a language model on zero songs"));
    }
    let mut model = LyricsLm::new(
        embedder.dim(),
        cfg.hidden,
        embedder.syl_vocab.len(),
        cfg.init_scale,
        cfg.seed,
    );
    let report = train_lm_into(&mut model, songs, embedder, cfg)?;
    Ok((model, report))
}

/// Training loop over an existing model, so callers can resume or pre-seed.
pub fn train_lm_into(
    model: &mut LyricsLm,
    songs: &[AlignedSong],
    embedder: &Embedder,
    cfg: &LmConfig,
) -> Result<LmTrainReport> {
    cfg.validate()?;
    model.check_compatible(embedder)?;
    let prepared: Vec<(Vec<Vec<f64>>, Vec<u32>)> = songs
        .iter()
        .map(|s| Ok((song_inputs(embedder, s)?, song_targets(&embedder.syl_vocab, s))))
        .collect::<Result<_>>()?;

    let mut adam = AdamState::new(model);
    let mut grads = model.zeros_like();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = if cfg.lr_decay {
            lr_schedule(cfg.lr, epoch)
        } else {
            cfg.lr
        };
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in prepared.chunks(cfg.batch) {
            let batch_tokens: usize = batch.iter().map(|(_, t)| t.len()).sum();
            grads.zero_all();
            let scale = 1.0 / batch_tokens as f64;
            for (inputs, targets) in batch {
                let fwd = forward_song(model, inputs, targets)?;
                epoch_loss += fwd.loss;
                backward_song(model, &mut grads, &fwd, targets, scale)?;
            }
            epoch_tokens += batch_tokens;
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.step(model, &grads, lr)?;
        }
        epoch_losses.push(epoch_loss / epoch_tokens as f64);
    }
    Ok(LmTrainReport { epoch_losses })
}

/// Summed cross-entropy over one song's predictions, no scaling. Pairs with
/// [`lm_song_grads`] for numeric gradient verification.
pub fn lm_song_loss(model: &LyricsLm, embedder: &Embedder, song: &AlignedSong) -> Result<f64> {
    model.check_compatible(embedder)?;
    let inputs = song_inputs(embedder, song)?;
    let targets = song_targets(&embedder.syl_vocab, song);
    Ok(forward_song(model, &inputs, &targets)?.loss)
}

/// Loss and full analytic gradients for one song, no scaling.
pub fn lm_song_grads(
    model: &LyricsLm,
    embedder: &Embedder,
    song: &AlignedSong,
) -> Result<(f64, LyricsLm)> {
    model.check_compatible(embedder)?;
    let inputs = song_inputs(embedder, song)?;
    let targets = song_targets(&embedder.syl_vocab, song);
    let fwd = forward_song(model, &inputs, &targets)?;
    let mut grads = model.zeros_like();
    backward_song(model, &mut grads, &fwd, &targets, 1.0)?;
    Ok((fwd.loss, grads))
}

/// Mean per-token loss of the corpus under the model, without training.
pub fn lm_loss(model: &LyricsLm, embedder: &Embedder, songs: &[AlignedSong]) -> Result<f64> {
    model.check_compatible(embedder)?;
    let mut total = 0.0;
    let mut tokens = 0usize;
    for song in songs {
        let inputs = song_inputs(embedder, song)?;
        let targets = song_targets(&embedder.syl_vocab, song);
        total += forward_song(model, &inputs, &targets)?.loss;
        tokens += targets.len();
    }
    if tokens == 0 {
        return Err(Error::invalid("no tokens to score"));
    }
    Ok(total / tokens as f64)
}

/// Fraction of teacher-forced positions whose argmax prediction matches the
/// training target.
pub fn teacher_forced_accuracy(
    model: &LyricsLm,
    embedder: &Embedder,
    songs: &[AlignedSong],
) -> Result<f64> {
    model.check_compatible(embedder)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for song in songs {
        let inputs = song_inputs(embedder, song)?;
        let targets = song_targets(&embedder.syl_vocab, song);
        let fwd = forward_song(model, &inputs, &targets)?;
        for (logits, &target) in fwd.logit_steps.iter().zip(&targets) {
            if argmax(logits) == target as usize {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

fn check_prefix(model: &LyricsLm, prefix: &[u32]) -> Result<()> {
    if let Some(&bad) = prefix.iter().find(|&&t| t as usize >= model.vocab_size) {
        return Err(Error::invalid(format!(
            "prefix token id {bad} outside vocabulary of {}; map unknowns to the unk id first",
            model.vocab_size
        )));
    }
    Ok(())
}

/// Distribution over the next token after a prefix, at temperature `tau`.
/// The prefix is embedded the same way generation embeds it: word vectors
/// resolve incrementally as words complete.
pub fn next_token_distribution(
    model: &LyricsLm,
    embedder: &Embedder,
    prefix: &[u32],
    tau: f64,
) -> Result<Vec<f64>> {
    model.check_compatible(embedder)?;
    check_prefix(model, prefix)?;
    let mut h = vec![0.0; model.hidden];
    let mut c = vec![0.0; model.hidden];
    let feed = |x: &[f64], h: &mut Vec<f64>, c: &mut Vec<f64>| -> Result<()> {
        let (nh, nc) = nn::lstm_step(&model.lstm, x, h, c)?;
        *h = nh;
        *c = nc;
        Ok(())
    };
    feed(&embedder.embed(Vocabulary::BOS, None)?, &mut h, &mut c)?;
    let mut stream = StreamEmbedder::new(embedder);
    for &t in prefix {
        let x = stream.push(t)?;
        feed(&x, &mut h, &mut c)?;
    }
    softmax_with_temperature(&model.logits(&h), tau)
}

/// Samples a syllable token stream that begins with `seed` and stops at the
/// end marker or after `max_len` tokens. The begin marker is never emitted.
/// Deterministic for a fixed `rng_seed`.
pub fn generate_lyrics(
    model: &LyricsLm,
    embedder: &Embedder,
    seed: &[u32],
    tau: f64,
    max_len: usize,
    rng_seed: u64,
) -> Result<Vec<u32>> {
    let lines = generate_lyric_lines(model, embedder, seed, tau, max_len, 1, rng_seed)?;
    Ok(lines.into_iter().next().unwrap_or_default())
}

/// Multi-line variant: sampling continues through end markers until `lines`
/// lines have completed or `max_len` tokens have been emitted in total.
/// Each inner vector is one lyric line without the end marker.
pub fn generate_lyric_lines(
    model: &LyricsLm,
    embedder: &Embedder,
    seed: &[u32],
    tau: f64,
    max_len: usize,
    lines: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<u32>>> {
    model.check_compatible(embedder)?;
    check_prefix(model, seed)?;
    if !seed.is_empty() && seed.iter().all(|&t| t == Vocabulary::UNK) {
        return Err(Error::invalid(
            "every seed token is unknown; nothing to condition on",
        ));
    }
    if max_len < seed.len() || max_len == 0 {
        return Err(Error::invalid(format!(
            "max_len {max_len} cannot hold the {}-token seed",
            seed.len()
        )));
    }
    if lines == 0 {
        return Err(Error::invalid("must generate at least one line"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut h = vec![0.0; model.hidden];
    let mut c = vec![0.0; model.hidden];
    let mut stream = StreamEmbedder::new(embedder);
    let feed = |x: &[f64], h: &mut Vec<f64>, c: &mut Vec<f64>| -> Result<()> {
        let (nh, nc) = nn::lstm_step(&model.lstm, x, h, c)?;
        *h = nh;
        *c = nc;
        Ok(())
    };

    feed(&embedder.embed(Vocabulary::BOS, None)?, &mut h, &mut c)?;
    let mut out: Vec<Vec<u32>> = vec![Vec::new()];
    let mut emitted = 0usize;
    for &t in seed {
        let x = stream.push(t)?;
        feed(&x, &mut h, &mut c)?;
        out.last_mut().unwrap().push(t);
        emitted += 1;
    }

    while emitted < max_len {
        let mut probs = softmax_with_temperature(&model.logits(&h), tau)?;
        // The begin marker is an input-only symbol.
        probs[Vocabulary::BOS as usize] = 0.0;
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let token = sample_categorical(&probs, &mut rng) as u32;
        if token == Vocabulary::EOS {
            if out.len() == lines {
                return Ok(out);
            }
            out.push(Vec::new());
            let x = stream.push(token)?;
            feed(&x, &mut h, &mut c)?;
            continue;
        }
        let x = stream.push(token)?;
        feed(&x, &mut h, &mut c)?;
        out.last_mut().unwrap().push(token);
        emitted += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, parse_corpus_str, VocabLevel};
    use crate::embedding::{CompositionScheme, EmbeddingTable};
    use approx::assert_abs_diff_eq;

    const CORPUS: &str = "\
do re mi fa : 60/1/0 62/1/0 64/1/0 65/1/0
mi fa so la : 64/1/0 65/1/0 67/1/0 69/1/0
so la ti do : 67/1/0 69/1/0 71/1/0 72/1/0
";

    fn toy_embedder(dim: usize, scheme: CompositionScheme) -> (Vec<crate::AlignedSong>, Embedder) {
        use rand::SeedableRng;
        let songs = parse_corpus_str(CORPUS).unwrap();
        let syl_vocab = build_vocab(&songs, VocabLevel::Syllable, 1).unwrap();
        let word_vocab = build_vocab(&songs, VocabLevel::Word, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let syl_table = EmbeddingTable::from_parts(
            VocabLevel::Syllable,
            Matrix::uniform(syl_vocab.len(), dim, -0.5, 0.5, &mut rng),
            Matrix::zeros(syl_vocab.len(), dim),
        );
        let word_table = EmbeddingTable::from_parts(
            VocabLevel::Word,
            Matrix::uniform(word_vocab.len(), dim, -0.5, 0.5, &mut rng),
            Matrix::zeros(word_vocab.len(), dim),
        );
        let embedder =
            Embedder::new(scheme, syl_vocab, word_vocab, syl_table, word_table).unwrap();
        (songs, embedder)
    }

    #[test]
    fn initial_loss_is_near_log_vocab() {
        let (songs, embedder) = toy_embedder(6, CompositionScheme::Se);
        let model = LyricsLm::new(embedder.dim(), 16, embedder.syl_vocab.len(), 0.01, 7);
        let loss = lm_loss(&model, &embedder, &songs).unwrap();
        let uniform = (embedder.syl_vocab.len() as f64).ln();
        assert_abs_diff_eq!(loss, uniform, epsilon = 0.05);
    }

    #[test]
    fn lm_gradients_match_finite_differences() {
        use crate::nn::grad_check;
        let (songs, embedder) = toy_embedder(5, CompositionScheme::Asw);
        let model = LyricsLm::new(embedder.dim(), 6, embedder.syl_vocab.len(), 0.2, 3);
        let inputs = song_inputs(&embedder, &songs[0]).unwrap();
        let targets = song_targets(&embedder.syl_vocab, &songs[0]);

        let fwd = forward_song(&model, &inputs, &targets).unwrap();
        let mut grads = model.zeros_like();
        backward_song(&model, &mut grads, &fwd, &targets, 1.0).unwrap();

        let template = model.clone();
        let max = grad_check(
            |flat| {
                let mut m = template.clone();
                m.set_from_flat(flat);
                Ok(forward_song(&m, &inputs, &targets)?.loss)
            },
            &model.to_flat(),
            &grads.to_flat(),
            1e-5,
        )
        .unwrap();
        assert!(max <= 1e-4, "max relative error {max}");
    }

    #[test]
    fn training_memorizes_a_tiny_corpus() {
        let (songs, embedder) = toy_embedder(6, CompositionScheme::Se);
        let cfg = LmConfig {
            hidden: 24,
            lr: 1e-2,
            lr_decay: false,
            batch: 1,
            epochs: 150,
            seed: 5,
            ..LmConfig::default()
        };
        let (model, report) = train_lm(&songs, &embedder, &cfg).unwrap();
        assert!(
            report.final_loss() < report.epoch_losses[0],
            "loss did not decrease: {:?}",
            (report.epoch_losses[0], report.final_loss())
        );
        // Branch positions keep an irreducible floor; everything else saturates.
        let acc = teacher_forced_accuracy(&model, &embedder, &songs).unwrap();
        assert!(acc > 0.7, "teacher-forced accuracy {acc}");

        // Memorized continuation: after "do re mi" the argmax must be "fa".
        let v = &embedder.syl_vocab;
        let prefix: Vec<u32> = ["do", "re", "mi"].iter().map(|t| v.id(t)).collect();
        let dist = next_token_distribution(&model, &embedder, &prefix, 1.0).unwrap();
        assert_eq!(argmax(&dist), v.id("fa") as usize);
        assert_abs_diff_eq!(dist.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn generation_is_deterministic_and_respects_seed_prefix() {
        let (songs, embedder) = toy_embedder(6, CompositionScheme::Se);
        let cfg = LmConfig {
            hidden: 16,
            lr: 1e-2,
            lr_decay: false,
            batch: 3,
            epochs: 60,
            seed: 9,
            ..LmConfig::default()
        };
        let (model, _) = train_lm(&songs, &embedder, &cfg).unwrap();
        let seed = [embedder.syl_vocab.id("mi")];
        let a = generate_lyrics(&model, &embedder, &seed, 0.8, 12, 42).unwrap();
        let b = generate_lyrics(&model, &embedder, &seed, 0.8, 12, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], seed[0]);
        assert!(a.len() <= 12);
        assert!(a.iter().all(|&t| t != Vocabulary::BOS && t != Vocabulary::EOS));

        let c = generate_lyrics(&model, &embedder, &seed, 0.8, 12, 43).unwrap();
        let d = generate_lyrics(&model, &embedder, &seed, 1.0, 12, 42).unwrap();
        // Different rng seed or temperature may change the continuation;
        // both must still start with the seed.
        assert_eq!(c[0], seed[0]);
        assert_eq!(d[0], seed[0]);
    }

    #[test]
    fn generation_rejects_degenerate_seeds() {
        let (_, embedder) = toy_embedder(6, CompositionScheme::Se);
        let model = LyricsLm::new(embedder.dim(), 8, embedder.syl_vocab.len(), 0.05, 2);
        let unk = Vocabulary::UNK;
        assert!(generate_lyrics(&model, &embedder, &[unk, unk], 0.8, 10, 1).is_err());
        assert!(generate_lyrics(&model, &embedder, &[3, 4], 0.8, 1, 1).is_err());
        assert!(generate_lyrics(&model, &embedder, &[9999], 0.8, 10, 1).is_err());
        assert!(generate_lyrics(&model, &embedder, &[3], 0.0, 10, 1).is_err());
    }

    #[test]
    fn multi_line_generation_splits_on_end_marker() {
        let (songs, embedder) = toy_embedder(6, CompositionScheme::Se);
        let cfg = LmConfig {
            hidden: 16,
            lr: 1e-2,
            lr_decay: false,
            batch: 3,
            epochs: 80,
            seed: 9,
            ..LmConfig::default()
        };
        let (model, _) = train_lm(&songs, &embedder, &cfg).unwrap();
        let lines =
            generate_lyric_lines(&model, &embedder, &[], 0.7, 40, 3, 11).unwrap();
        assert!(lines.len() <= 3);
        let total: usize = lines.iter().map(Vec::len).sum();
        assert!(total <= 40);
    }
}
