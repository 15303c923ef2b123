//! Attention-based encoder-decoder that writes one note per syllable.
//!
//! An LSTM encoder reads the composed lyric vectors. Three decoder LSTMs,
//! one per note attribute (pitch, duration, rest), share a single additive
//! attention over the encoder states, queried by the pitch decoder's
//! previous hidden state. Every decoder consumes the same step input: the
//! embeddings of the previous note's three classes concatenated with the
//! attention context. Decoding starts from the encoder's final state and a
//! learned start embedding in place of a previous note.

mod train;

pub use train::{
    ltmn_corpus_loss, ltmn_grads, ltmn_loss, song_note_classes, train_ltmn, train_ltmn_into,
    LtmnTrainConfig, LtmnTrainReport,
};

use crate::corpus::{attribute_class_value, AttrKind, NoteAttributes};
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::nn::{
    self, argmax, dot, lstm_step, sample_categorical, softmax_with_temperature, LstmParams,
    Matrix, Tensors,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_ATTR_EMB_DIM: usize = 128;
pub const DEFAULT_ATTN_DIM: usize = 128;

/// Shape hyperparameters. `input_dim` is the composed lyric vector width the
/// paired embedder produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MelodyConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub attr_emb_dim: usize,
}

impl MelodyConfig {
    pub fn new(input_dim: usize) -> Self {
        MelodyConfig {
            input_dim,
            hidden: nn::DEFAULT_HIDDEN,
            attn_dim: DEFAULT_ATTN_DIM,
            attr_emb_dim: DEFAULT_ATTR_EMB_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.attn_dim == 0 || self.attr_emb_dim == 0
        {
            return Err(Error::invalid("all melody model dimensions must be at least 1"));
        }
        Ok(())
    }

    /// Width of every decoder step input: three attribute embeddings plus
    /// the attention context.
    pub fn decoder_input_dim(&self) -> usize {
        3 * self.attr_emb_dim + self.hidden
    }
}

/// Additive attention: `e_j = v_a . tanh(w_a q + u_a h_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_a: Matrix,
    pub u_a: Matrix,
    pub v_a: Matrix,
}

impl AttentionParams {
    fn uniform(attn_dim: usize, hidden: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        AttentionParams {
            w_a: Matrix::uniform(attn_dim, hidden, -scale, scale, rng),
            u_a: Matrix::uniform(attn_dim, hidden, -scale, scale, rng),
            v_a: Matrix::uniform(attn_dim, 1, -scale, scale, rng),
        }
    }

    fn zeros(attn_dim: usize, hidden: usize) -> Self {
        AttentionParams {
            w_a: Matrix::zeros(attn_dim, hidden),
            u_a: Matrix::zeros(attn_dim, hidden),
            v_a: Matrix::zeros(attn_dim, 1),
        }
    }
}

/// One attribute's decoder: an LSTM plus a class projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderHead {
    pub lstm: LstmParams,
    pub proj_w: Matrix,
    pub proj_b: Matrix,
}

impl DecoderHead {
    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.proj_b.data().to_vec();
        self.proj_w.mul_vec_acc(h, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelodyModel {
    pub cfg: MelodyConfig,
    pub encoder: LstmParams,
    pub attention: AttentionParams,
    /// Pitch, duration, rest, in [`AttrKind::ALL`] order.
    pub heads: [DecoderHead; 3],
    /// Trainable class embeddings, `class_count x attr_emb_dim` each.
    pub attr_emb: [Matrix; 3],
    /// Learned stand-in for the previous note at the first step.
    pub start_emb: Matrix,
}

impl MelodyModel {
    pub fn new(cfg: MelodyConfig, init_scale: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if !init_scale.is_finite() || init_scale <= 0.0 {
            return Err(Error::invalid(format!(
                "init scale must be > 0, got {init_scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dec_in = cfg.decoder_input_dim();
        let head = |rng: &mut ChaCha8Rng, classes: usize| DecoderHead {
            lstm: LstmParams::uniform(dec_in, cfg.hidden, init_scale, rng),
            proj_w: Matrix::uniform(classes, cfg.hidden, -init_scale, init_scale, rng),
            proj_b: Matrix::zeros(classes, 1),
        };
        Ok(MelodyModel {
            cfg,
            encoder: LstmParams::uniform(cfg.input_dim, cfg.hidden, init_scale, &mut rng),
            attention: AttentionParams::uniform(cfg.attn_dim, cfg.hidden, init_scale, &mut rng),
            heads: [
                head(&mut rng, AttrKind::Pitch.class_count()),
                head(&mut rng, AttrKind::Duration.class_count()),
                head(&mut rng, AttrKind::Rest.class_count()),
            ],
            attr_emb: [
                Matrix::uniform(
                    AttrKind::Pitch.class_count(),
                    cfg.attr_emb_dim,
                    -init_scale,
                    init_scale,
                    &mut rng,
                ),
                Matrix::uniform(
                    AttrKind::Duration.class_count(),
                    cfg.attr_emb_dim,
                    -init_scale,
                    init_scale,
                    &mut rng,
                ),
                Matrix::uniform(
                    AttrKind::Rest.class_count(),
                    cfg.attr_emb_dim,
                    -init_scale,
                    init_scale,
                    &mut rng,
                ),
            ],
            start_emb: Matrix::uniform(1, 3 * cfg.attr_emb_dim, -init_scale, init_scale, &mut rng),
        })
    }

    pub fn zeros(cfg: MelodyConfig) -> Result<Self> {
        cfg.validate()?;
        let dec_in = cfg.decoder_input_dim();
        let head = |classes: usize| DecoderHead {
            lstm: LstmParams::zeros(dec_in, cfg.hidden),
            proj_w: Matrix::zeros(classes, cfg.hidden),
            proj_b: Matrix::zeros(classes, 1),
        };
        Ok(MelodyModel {
            cfg,
            encoder: LstmParams::zeros(cfg.input_dim, cfg.hidden),
            attention: AttentionParams::zeros(cfg.attn_dim, cfg.hidden),
            heads: [
                head(AttrKind::Pitch.class_count()),
                head(AttrKind::Duration.class_count()),
                head(AttrKind::Rest.class_count()),
            ],
            attr_emb: [
                Matrix::zeros(AttrKind::Pitch.class_count(), cfg.attr_emb_dim),
                Matrix::zeros(AttrKind::Duration.class_count(), cfg.attr_emb_dim),
                Matrix::zeros(AttrKind::Rest.class_count(), cfg.attr_emb_dim),
            ],
            start_emb: Matrix::zeros(1, 3 * cfg.attr_emb_dim),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.cfg).expect("existing config is valid")
    }

    pub fn check_compatible(&self, embedder: &Embedder) -> Result<()> {
        if self.cfg.input_dim != embedder.dim() {
            return Err(Error::shape(format!(
                "melody model expects {}-dim inputs but embedder produces {}",
                self.cfg.input_dim,
                embedder.dim()
            )));
        }
        Ok(())
    }

    /// The step input's note-embedding block: the start embedding before any
    /// note exists, afterwards the three class embeddings concatenated.
    fn prev_embedding(&self, prev: Option<[usize; 3]>) -> Result<Vec<f64>> {
        match prev {
            None => Ok(self.start_emb.row(0).to_vec()),
            Some(classes) => {
                let mut out = Vec::with_capacity(3 * self.cfg.attr_emb_dim);
                for (k, kind) in AttrKind::ALL.iter().enumerate() {
                    if classes[k] >= kind.class_count() {
                        return Err(Error::invalid(format!(
                            "{} class {} out of range 0..{}",
                            kind.name(),
                            classes[k],
                            kind.class_count()
                        )));
                    }
                    out.extend_from_slice(self.attr_emb[k].row(classes[k]));
                }
                Ok(out)
            }
        }
    }

    pub fn init_decoder(&self, enc: &EncoderStates) -> DecoderState {
        let h = enc.h.last().expect("encoder states are never empty").clone();
        DecoderState {
            h: [h.clone(), h.clone(), h],
            c: [enc.final_c.clone(), enc.final_c.clone(), enc.final_c.clone()],
            prev: None,
        }
    }
}

impl Tensors for MelodyModel {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        self.encoder.visit(&nn::join_name(prefix, "enc"), out);
        out.push((nn::join_name(prefix, "att.w_a"), &self.attention.w_a));
        out.push((nn::join_name(prefix, "att.u_a"), &self.attention.u_a));
        out.push((nn::join_name(prefix, "att.v_a"), &self.attention.v_a));
        for (head, kind) in self.heads.iter().zip(AttrKind::ALL) {
            let dec = format!("dec_{}", kind.name());
            head.lstm.visit(&nn::join_name(prefix, &dec), out);
            out.push((nn::join_name(prefix, &format!("proj_{}.w", kind.name())), &head.proj_w));
            out.push((nn::join_name(prefix, &format!("proj_{}.b", kind.name())), &head.proj_b));
        }
        for (emb, kind) in self.attr_emb.iter().zip(AttrKind::ALL) {
            out.push((nn::join_name(prefix, &format!("emb_{}", kind.name())), emb));
        }
        out.push((nn::join_name(prefix, "start"), &self.start_emb));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        self.encoder.visit_mut(&nn::join_name(prefix, "enc"), out);
        out.push((nn::join_name(prefix, "att.w_a"), &mut self.attention.w_a));
        out.push((nn::join_name(prefix, "att.u_a"), &mut self.attention.u_a));
        out.push((nn::join_name(prefix, "att.v_a"), &mut self.attention.v_a));
        let [p, d, r] = &mut self.heads;
        for (head, kind) in [p, d, r].into_iter().zip(AttrKind::ALL) {
            let dec = format!("dec_{}", kind.name());
            head.lstm.visit_mut(&nn::join_name(prefix, &dec), out);
            out.push((
                nn::join_name(prefix, &format!("proj_{}.w", kind.name())),
                &mut head.proj_w,
            ));
            out.push((
                nn::join_name(prefix, &format!("proj_{}.b", kind.name())),
                &mut head.proj_b,
            ));
        }
        let [ep, ed, er] = &mut self.attr_emb;
        for (emb, kind) in [ep, ed, er].into_iter().zip(AttrKind::ALL) {
            out.push((nn::join_name(prefix, &format!("emb_{}", kind.name())), emb));
        }
        out.push((nn::join_name(prefix, "start"), &mut self.start_emb));
    }
}

/// Hidden states of every encoder step plus the final cell, kept for
/// attention and decoder initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    pub h: Vec<Vec<f64>>,
    pub final_c: Vec<f64>,
}

pub fn encode(model: &MelodyModel, inputs: &[Vec<f64>]) -> Result<EncoderStates> {
    if inputs.is_empty() {
        return Err(Error::invalid("cannot encode an empty lyric line"));
    }
    let mut h = vec![0.0; model.cfg.hidden];
    let mut c = vec![0.0; model.cfg.hidden];
    let mut states = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (nh, nc) = lstm_step(&model.encoder, x, &h, &c)?;
        h = nh;
        c = nc;
        states.push(h.clone());
    }
    Ok(EncoderStates {
        h: states,
        final_c: c,
    })
}

/// Attention weights and context for one query over the encoder states.
/// With a zero scoring vector every energy is zero, so the weights are
/// exactly uniform; with a single encoder state the context equals it.
pub fn attend(
    att: &AttentionParams,
    query: &[f64],
    states: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (context, cache) = attend_cached(att, query, states)?;
    Ok((cache.alpha, context))
}

/// Per-step attention intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttendCache {
    pub alpha: Vec<f64>,
    /// `tanh(w_a q + u_a h_j)` per encoder position.
    pub act: Vec<Vec<f64>>,
}

pub(crate) fn attend_cached(
    att: &AttentionParams,
    query: &[f64],
    states: &[Vec<f64>],
) -> Result<(Vec<f64>, AttendCache)> {
    if states.is_empty() {
        return Err(Error::invalid("attention needs at least one encoder state"));
    }
    let attn_dim = att.w_a.rows();
    let hidden = att.w_a.cols();
    if query.len() != hidden {
        return Err(Error::shape(format!(
            "attention query has {} dims, expected {hidden}",
            query.len()
        )));
    }
    let mut wq = vec![0.0; attn_dim];
    att.w_a.mul_vec_into(query, &mut wq);
    let mut energies = Vec::with_capacity(states.len());
    let mut act = Vec::with_capacity(states.len());
    for h in states {
        if h.len() != hidden {
            return Err(Error::shape(format!(
                "encoder state has {} dims, expected {hidden}",
                h.len()
            )));
        }
        let mut z = wq.clone();
        att.u_a.mul_vec_acc(h, &mut z);
        for v in &mut z {
            *v = v.tanh();
        }
        energies.push(dot(att.v_a.data(), &z));
        act.push(z);
    }
    let alpha = softmax_with_temperature(&energies, 1.0)?;
    let mut context = vec![0.0; hidden];
    for (a, h) in alpha.iter().zip(states) {
        for (ci, hi) in context.iter_mut().zip(h) {
            *ci += a * hi;
        }
    }
    Ok((context, AttendCache { alpha, act }))
}

/// Mutable decoding state: one hidden/cell pair per attribute head plus the
/// classes of the previously emitted note.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub h: [Vec<f64>; 3],
    pub c: [Vec<f64>; 3],
    pub prev: Option<[usize; 3]>,
}

/// Advances all three heads one step. Returns per-head logits and the
/// attention weights used. The caller picks classes and stores them in
/// `state.prev` before the next call.
pub fn decode_step(
    model: &MelodyModel,
    state: &mut DecoderState,
    enc: &EncoderStates,
) -> Result<([Vec<f64>; 3], Vec<f64>)> {
    let (alpha, context) = attend(&model.attention, &state.h[0], &enc.h)?;
    let mut x = model.prev_embedding(state.prev)?;
    x.extend_from_slice(&context);
    let mut logits: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for k in 0..3 {
        let (nh, nc) = lstm_step(&model.heads[k].lstm, &x, &state.h[k], &state.c[k])?;
        state.h[k] = nh;
        state.c[k] = nc;
        logits[k] = model.heads[k].logits(&state.h[k]);
    }
    Ok((logits, alpha))
}

/// How generation picks a class from each head's logits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    Sample { tau: f64, seed: u64 },
}

/// Attention weights recorded during generation: one row per emitted note,
/// one column per lyric position.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub alpha: Vec<Vec<f64>>,
}

/// Generates one note per input vector. Greedy decoding takes each head's
/// argmax; sampling draws from the temperature-scaled distributions with a
/// seeded generator, so both modes are deterministic.
pub fn generate_melody(
    model: &MelodyModel,
    inputs: &[Vec<f64>],
    mode: DecodeMode,
) -> Result<(Vec<NoteAttributes>, AttentionTrace)> {
    let enc = encode(model, inputs)?;
    let mut state = model.init_decoder(&enc);
    let mut rng = match mode {
        DecodeMode::Greedy => None,
        DecodeMode::Sample { tau, seed } => {
            if !tau.is_finite() || tau <= 0.0 {
                return Err(Error::invalid(format!(
                    "sampling temperature must be > 0, got {tau}"
                )));
            }
            Some((tau, ChaCha8Rng::seed_from_u64(seed)))
        }
    };
    let mut notes = Vec::with_capacity(inputs.len());
    let mut trace = Vec::with_capacity(inputs.len());
    for _ in 0..inputs.len() {
        let (logits, alpha) = decode_step(model, &mut state, &enc)?;
        let mut classes = [0usize; 3];
        for k in 0..3 {
            classes[k] = match &mut rng {
                None => argmax(&logits[k]),
                Some((tau, rng)) => {
                    let probs = softmax_with_temperature(&logits[k], *tau)?;
                    sample_categorical(&probs, rng)
                }
            };
        }
        state.prev = Some(classes);
        trace.push(alpha);
        notes.push(NoteAttributes {
            pitch: attribute_class_value(AttrKind::Pitch, classes[0])? as u8,
            duration: attribute_class_value(AttrKind::Duration, classes[1])?,
            rest: attribute_class_value(AttrKind::Rest, classes[2])?,
        });
    }
    Ok((notes, AttentionTrace { alpha: trace }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn tiny_cfg() -> MelodyConfig {
        MelodyConfig {
            input_dim: 4,
            hidden: 5,
            attn_dim: 3,
            attr_emb_dim: 2,
        }
    }

    fn random_inputs(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_model_encodes_to_zero_states() {
        let model = MelodyModel::zeros(tiny_cfg()).unwrap();
        let enc = encode(&model, &random_inputs(3, 4, 1)).unwrap();
        assert_eq!(enc.h.len(), 3);
        assert!(enc.h.iter().all(|h| h.iter().all(|&v| v == 0.0)));
        assert!(enc.final_c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attention_weights_form_a_distribution() {
        let model = MelodyModel::new(tiny_cfg(), 0.4, 3).unwrap();
        let enc = encode(&model, &random_inputs(6, 4, 2)).unwrap();
        let query: Vec<f64> = (0..5).map(|i| 0.1 * i as f64).collect();
        let (alpha, context) = attend(&model.attention, &query, &enc.h).unwrap();
        assert_eq!(alpha.len(), 6);
        assert!(alpha.iter().all(|&a| a > 0.0));
        assert_abs_diff_eq!(alpha.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(context.len(), 5);
    }

    #[test]
    fn zero_scoring_vector_gives_exactly_uniform_weights() {
        let mut model = MelodyModel::new(tiny_cfg(), 0.4, 4).unwrap();
        model.attention.v_a.fill(0.0);
        let enc = encode(&model, &random_inputs(7, 4, 5)).unwrap();
        let (alpha, _) = attend(&model.attention, &enc.h[3].clone(), &enc.h).unwrap();
        for a in alpha {
            assert_eq!(a, 1.0 / 7.0);
        }
    }

    #[test]
    fn single_state_attention_returns_it_unchanged() {
        let model = MelodyModel::new(tiny_cfg(), 0.4, 6).unwrap();
        let enc = encode(&model, &random_inputs(1, 4, 7)).unwrap();
        let query: Vec<f64> = vec![0.3; 5];
        let (alpha, context) = attend(&model.attention, &query, &enc.h).unwrap();
        assert_eq!(alpha, vec![1.0]);
        assert_eq!(context, enc.h[0]);
    }

    #[test]
    fn attention_matches_a_direct_transcription() {
        // Independent recomputation with nested loops over matrix entries.
        let att = {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            AttentionParams {
                w_a: Matrix::uniform(3, 5, -0.7, 0.7, &mut rng),
                u_a: Matrix::uniform(3, 5, -0.7, 0.7, &mut rng),
                v_a: Matrix::uniform(3, 1, -0.7, 0.7, &mut rng),
            }
        };
        let states = random_inputs(4, 5, 12);
        let query = random_inputs(1, 5, 13).pop().unwrap();

        let mut energies = Vec::new();
        for h in &states {
            let mut e = 0.0;
            for i in 0..3 {
                let mut z = 0.0;
                for k in 0..5 {
                    z += att.w_a.get(i, k) * query[k] + att.u_a.get(i, k) * h[k];
                }
                e += att.v_a.get(i, 0) * z.tanh();
            }
            energies.push(e);
        }
        let max = energies.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = energies.iter().map(|e| (e - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let want_alpha: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let mut want_context = vec![0.0; 5];
        for (a, h) in want_alpha.iter().zip(&states) {
            for k in 0..5 {
                want_context[k] += a * h[k];
            }
        }

        let (alpha, context) = attend(&att, &query, &states).unwrap();
        for (got, want) in alpha.iter().zip(&want_alpha) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        for (got, want) in context.iter().zip(&want_context) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn decode_emits_valid_note_attributes() {
        let model = MelodyModel::new(tiny_cfg(), 0.4, 8).unwrap();
        let inputs = random_inputs(5, 4, 9);
        let (notes, trace) = generate_melody(&model, &inputs, DecodeMode::Greedy).unwrap();
        assert_eq!(notes.len(), 5);
        assert_eq!(trace.alpha.len(), 5);
        for row in &trace.alpha {
            assert_eq!(row.len(), 5);
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        for n in &notes {
            crate::corpus::validate_attributes(n.pitch as f64, n.duration, n.rest).unwrap();
        }
    }

    #[test]
    fn greedy_decoding_ignores_the_sampling_seed() {
        let model = MelodyModel::new(tiny_cfg(), 0.4, 10).unwrap();
        let inputs = random_inputs(4, 4, 11);
        let (a, _) = generate_melody(&model, &inputs, DecodeMode::Greedy).unwrap();
        let (b, _) = generate_melody(&model, &inputs, DecodeMode::Greedy).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate_melody(&model, &inputs, DecodeMode::Sample { tau: 0.8, seed: 1 }).unwrap();
        let (d, _) = generate_melody(&model, &inputs, DecodeMode::Sample { tau: 0.8, seed: 1 }).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = MelodyModel::new(tiny_cfg(), 0.4, 12).unwrap();
        assert!(encode(&model, &[]).is_err());
        assert!(encode(&model, &[vec![0.0; 3]]).is_err());
        assert!(generate_melody(
            &model,
            &random_inputs(2, 4, 1),
            DecodeMode::Sample { tau: 0.0, seed: 1 }
        )
        .is_err());
    }
}
