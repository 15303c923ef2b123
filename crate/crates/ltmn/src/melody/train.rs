//! Teacher-forced training for the melody model.
//!
//! The backward pass retraces generation exactly: class-projection and LSTM
//! gradients per head, the shared step input split back into attribute
//! embeddings and attention context, attention unrolled into energies and
//! encoder states, and the query gradient carried to the pitch decoder's
//! previous step. The decoder's initial states and the first query hand
//! their gradients to the encoder's final step, which then runs ordinary
//! backpropagation through time.

use super::{
    attend_cached, AttendCache, AttentionParams, EncoderStates, MelodyConfig, MelodyModel,
};
use crate::corpus::{AlignedSong, AttrKind};
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::nn::{
    self, clip_global_norm, lr_schedule, lstm_step_backward, lstm_step_cached, softmax_ce_grad,
    AdamState, LstmStepCache, Tensors,
};

#[derive(Debug, Clone)]
pub struct LtmnTrainConfig {
    pub hidden: usize,
    pub attn_dim: usize,
    pub attr_emb_dim: usize,
    pub lr: f64,
    /// Apply the stepped decay schedule on top of `lr`.
    pub lr_decay: bool,
    pub batch: usize,
    pub epochs: usize,
    pub clip_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for LtmnTrainConfig {
    fn default() -> Self {
        LtmnTrainConfig {
            hidden: nn::DEFAULT_HIDDEN,
            attn_dim: super::DEFAULT_ATTN_DIM,
            attr_emb_dim: super::DEFAULT_ATTR_EMB_DIM,
            lr: 1e-4,
            lr_decay: true,
            batch: 32,
            epochs: 100,
            clip_norm: 5.0,
            init_scale: 0.08,
            seed: 1,
        }
    }
}

impl LtmnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be at least 1"));
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

    pub fn model_config(&self, input_dim: usize) -> MelodyConfig {
        MelodyConfig {
            input_dim,
            hidden: self.hidden,
            attn_dim: self.attn_dim,
            attr_emb_dim: self.attr_emb_dim,
        }
    }
}

/// Per-syllable class targets `[pitch, duration, rest]` of one song.
pub fn song_note_classes(song: &AlignedSong) -> Vec<[usize; 3]> {
    song.notes()
        .iter()
        .map(|n| [n.pitch_class(), n.duration_class(), n.rest_class()])
        .collect()
}

struct DecodeStepCache {
    /// Pitch decoder hidden that queried attention this step.
    query: Vec<f64>,
    attn: AttendCache,
    head: [LstmStepCache; 3],
    logits: [Vec<f64>; 3],
}

struct SongForward {
    enc_caches: Vec<LstmStepCache>,
    enc: EncoderStates,
    steps: Vec<DecodeStepCache>,
    loss: f64,
}

fn check_pair(model: &MelodyModel, inputs: &[Vec<f64>], targets: &[[usize; 3]]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("cannot train on an empty lyric line"));
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != model.cfg.input_dim) {
        return Err(Error::shape(format!(
            "lyric vector has {} dims, model expects {}",
            x.len(),
            model.cfg.input_dim
        )));
    }
    if inputs.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} lyric positions but {} target notes",
            inputs.len(),
            targets.len()
        )));
    }
    for t in targets {
        for (k, kind) in AttrKind::ALL.iter().enumerate() {
            if t[k] >= kind.class_count() {
                return Err(Error::invalid(format!(
                    "{} class {} out of range 0..{}",
                    kind.name(),
                    t[k],
                    kind.class_count()
                )));
            }
        }
    }
    Ok(())
}

fn forward_song(
    model: &MelodyModel,
    inputs: &[Vec<f64>],
    targets: &[[usize; 3]],
) -> Result<SongForward> {
    check_pair(model, inputs, targets)?;
    let hidden = model.cfg.hidden;

    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut enc_caches = Vec::with_capacity(inputs.len());
    let mut enc_h = Vec::with_capacity(inputs.len());
    for x in inputs {
        let cache = lstm_step_cached(&model.encoder, x, &h, &c)?;
        h = cache.h();
        c = cache.c.clone();
        enc_h.push(h.clone());
        enc_caches.push(cache);
    }
    let enc = EncoderStates {
        h: enc_h,
        final_c: c,
    };

    let mut state = model.init_decoder(&enc);
    let mut steps = Vec::with_capacity(targets.len());
    let mut loss = 0.0;
    for (t, target) in targets.iter().enumerate() {
        let query = state.h[0].clone();
        let (context, attn) = attend_cached(&model.attention, &query, &enc.h)?;
        let prev = if t == 0 { None } else { Some(targets[t - 1]) };
        let mut x = model.prev_embedding(prev)?;
        x.extend_from_slice(&context);

        let mut head: [Option<LstmStepCache>; 3] = [None, None, None];
        let mut logits: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for k in 0..3 {
            let cache = lstm_step_cached(&model.heads[k].lstm, &x, &state.h[k], &state.c[k])?;
            state.h[k] = cache.h();
            state.c[k] = cache.c.clone();
            logits[k] = model.heads[k].logits(&state.h[k]);
            let (l, _) = softmax_ce_grad(&logits[k], target[k])?;
            loss += l;
            head[k] = Some(cache);
        }
        state.prev = Some(*target);
        steps.push(DecodeStepCache {
            query,
            attn,
            head: head.map(|c| c.expect("filled above")),
            logits,
        });
    }
    Ok(SongForward {
        enc_caches,
        enc,
        steps,
        loss,
    })
}

/// Backpropagates one attention step. `d_context` is the loss gradient on
/// the returned context; encoder-state gradients accumulate into `d_states`
/// and the return value is the gradient on the query.
fn attend_backward(
    att: &AttentionParams,
    grads: &mut AttentionParams,
    cache: &AttendCache,
    query: &[f64],
    states: &[Vec<f64>],
    d_context: &[f64],
    d_states: &mut [Vec<f64>],
) -> Vec<f64> {
    let hidden = att.w_a.cols();
    let n = states.len();

    // Context is a convex combination: split d_context over weights and states.
    let mut d_alpha = vec![0.0; n];
    for j in 0..n {
        d_alpha[j] = nn::dot(d_context, &states[j]);
        for (ds, dc) in d_states[j].iter_mut().zip(d_context) {
            *ds += cache.alpha[j] * dc;
        }
    }
    // Softmax jacobian: de_j = a_j (d_alpha_j - sum_k a_k d_alpha_k).
    let mix: f64 = cache
        .alpha
        .iter()
        .zip(&d_alpha)
        .map(|(a, d)| a * d)
        .sum();
    let mut d_query = vec![0.0; hidden];
    let v_a = att.v_a.data();
    for j in 0..n {
        let de = cache.alpha[j] * (d_alpha[j] - mix);
        let act = &cache.act[j];
        let gv = grads.v_a.data_mut();
        for i in 0..act.len() {
            gv[i] += de * act[i];
        }
        let da: Vec<f64> = act
            .iter()
            .zip(v_a)
            .map(|(a, v)| de * v * (1.0 - a * a))
            .collect();
        grads.w_a.add_outer(&da, query);
        grads.u_a.add_outer(&da, &states[j]);
        att.w_a.mul_t_vec_acc(&da, &mut d_query);
        att.u_a.mul_t_vec_acc(&da, &mut d_states[j]);
    }
    d_query
}

/// Accumulates gradients of the summed step losses, scaled by `scale`.
fn backward_song(
    model: &MelodyModel,
    grads: &mut MelodyModel,
    fwd: &SongForward,
    targets: &[[usize; 3]],
    scale: f64,
) -> Result<()> {
    let hidden = model.cfg.hidden;
    let emb_dim = model.cfg.attr_emb_dim;
    let t_enc = fwd.enc.h.len();

    let mut d_enc_h = vec![vec![0.0; hidden]; t_enc];
    let mut carry_dh: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; hidden]);
    let mut carry_dc: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; hidden]);
    // Gradient on the query of the step after the current one; the query at
    // step t+1 is the pitch decoder's hidden state after step t.
    let mut pending_dquery = vec![0.0; hidden];

    for t in (0..fwd.steps.len()).rev() {
        let step = &fwd.steps[t];
        let mut dx = vec![0.0; model.cfg.decoder_input_dim()];
        for k in 0..3 {
            let (_, mut dlogits) = softmax_ce_grad(&step.logits[k], targets[t][k])?;
            for g in &mut dlogits {
                *g *= scale;
            }
            let h_k = step.head[k].h();
            grads.heads[k].proj_w.add_outer(&dlogits, &h_k);
            for (b, g) in grads.heads[k].proj_b.data_mut().iter_mut().zip(&dlogits) {
                *b += g;
            }
            let mut dh = std::mem::take(&mut carry_dh[k]);
            model.heads[k].proj_w.mul_t_vec_acc(&dlogits, &mut dh);
            if k == 0 {
                for (d, p) in dh.iter_mut().zip(&pending_dquery) {
                    *d += p;
                }
            }
            let (dx_k, dh_prev, dc_prev) = lstm_step_backward(
                &model.heads[k].lstm,
                &mut grads.heads[k].lstm,
                &step.head[k],
                &dh,
                &carry_dc[k],
            );
            for (acc, v) in dx.iter_mut().zip(&dx_k) {
                *acc += v;
            }
            carry_dh[k] = dh_prev;
            carry_dc[k] = dc_prev;
        }

        let (d_prev, d_ctx) = dx.split_at(3 * emb_dim);
        if t == 0 {
            for (g, d) in grads.start_emb.row_mut(0).iter_mut().zip(d_prev) {
                *g += d;
            }
        } else {
            for k in 0..3 {
                let seg = &d_prev[k * emb_dim..(k + 1) * emb_dim];
                let row = grads.attr_emb[k].row_mut(targets[t - 1][k]);
                for (g, d) in row.iter_mut().zip(seg) {
                    *g += d;
                }
            }
        }

        pending_dquery = attend_backward(
            &model.attention,
            &mut grads.attention,
            &step.attn,
            &step.query,
            &fwd.enc.h,
            d_ctx,
            &mut d_enc_h,
        );
    }

    // Decoder initial h/c and the first query are copies of the encoder's
    // final state, so their gradients all land there.
    let mut d_final_c = vec![0.0; hidden];
    for k in 0..3 {
        for (acc, v) in d_enc_h[t_enc - 1].iter_mut().zip(&carry_dh[k]) {
            *acc += v;
        }
        for (acc, v) in d_final_c.iter_mut().zip(&carry_dc[k]) {
            *acc += v;
        }
    }
    for (acc, v) in d_enc_h[t_enc - 1].iter_mut().zip(&pending_dquery) {
        *acc += v;
    }

    let mut carry_eh = vec![0.0; hidden];
    let mut carry_ec = d_final_c;
    for t in (0..t_enc).rev() {
        let mut dh = std::mem::take(&mut d_enc_h[t]);
        for (d, v) in dh.iter_mut().zip(&carry_eh) {
            *d += v;
        }
        let (_, dh_prev, dc_prev) =
            lstm_step_backward(&model.encoder, &mut grads.encoder, &fwd.enc_caches[t], &dh, &carry_ec);
        carry_eh = dh_prev;
        carry_ec = dc_prev;
    }
    Ok(())
}

/// Summed cross-entropy of the teacher-forced decode of one pair. Used by
/// gradient checks and loss reporting.
pub fn ltmn_loss(model: &MelodyModel, inputs: &[Vec<f64>], targets: &[[usize; 3]]) -> Result<f64> {
    Ok(forward_song(model, inputs, targets)?.loss)
}

/// Loss and full analytic gradients for one pair, with no scaling.
pub fn ltmn_grads(
    model: &MelodyModel,
    inputs: &[Vec<f64>],
    targets: &[[usize; 3]],
) -> Result<(f64, MelodyModel)> {
    let fwd = forward_song(model, inputs, targets)?;
    let mut grads = model.zeros_like();
    backward_song(model, &mut grads, &fwd, targets, 1.0)?;
    Ok((fwd.loss, grads))
}

/// Per-epoch mean loss in nats per syllable (three class terms each).
#[derive(Debug, Clone)]
pub struct LtmnTrainReport {
    pub epoch_losses: Vec<f64>,
}

impl LtmnTrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().unwrap_or(&f64::NAN)
    }
}

/// Trains a fresh melody model on aligned songs with teacher forcing, Adam,
/// and global-norm clipping. Deterministic for a fixed config.
pub fn train_ltmn(
    songs: &[AlignedSong],
    embedder: &Embedder,
    cfg: &LtmnTrainConfig,
) -> Result<(MelodyModel, LtmnTrainReport)> {
    cfg.validate()?;
    if songs.is_empty() {
        return Err(Error::invalid("cannot train a melody model on zero songs"));
    }
    let mut model = MelodyModel::new(cfg.model_config(embedder.dim()), cfg.init_scale, cfg.seed)?;
    let report = train_ltmn_into(&mut model, songs, embedder, cfg)?;
    Ok((model, report))
}

/// Training loop over an existing model, so callers can resume or pre-seed.
pub fn train_ltmn_into(
    model: &mut MelodyModel,
    songs: &[AlignedSong],
    embedder: &Embedder,
    cfg: &LtmnTrainConfig,
) -> Result<LtmnTrainReport> {
    cfg.validate()?;
    model.check_compatible(embedder)?;
    let prepared: Vec<(Vec<Vec<f64>>, Vec<[usize; 3]>)> = songs
        .iter()
        .map(|s| Ok((embedder.embed_song(s)?, song_note_classes(s))))
        .collect::<Result<_>>()?;
    for (inputs, targets) in &prepared {
        check_pair(model, inputs, targets)?;
    }

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
        let mut epoch_steps = 0usize;
        for batch in prepared.chunks(cfg.batch) {
            let batch_steps: usize = batch.iter().map(|(_, t)| t.len()).sum();
            grads.zero_all();
            let scale = 1.0 / batch_steps as f64;
            for (inputs, targets) in batch {
                let fwd = forward_song(model, inputs, targets)?;
                epoch_loss += fwd.loss;
                backward_song(model, &mut grads, &fwd, targets, scale)?;
            }
            epoch_steps += batch_steps;
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.step(model, &grads, lr)?;
        }
        epoch_losses.push(epoch_loss / epoch_steps as f64);
    }
    Ok(LtmnTrainReport { epoch_losses })
}

/// Mean per-syllable loss of aligned songs under the model, without training.
pub fn ltmn_corpus_loss(
    model: &MelodyModel,
    embedder: &Embedder,
    songs: &[AlignedSong],
) -> Result<f64> {
    model.check_compatible(embedder)?;
    let mut total = 0.0;
    let mut steps = 0usize;
    for song in songs {
        let inputs = embedder.embed_song(song)?;
        let targets = song_note_classes(song);
        total += ltmn_loss(model, &inputs, &targets)?;
        steps += targets.len();
    }
    if steps == 0 {
        return Err(Error::invalid("no notes to score"));
    }
    Ok(total / steps as f64)
}
