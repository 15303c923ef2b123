//! Skip-gram embedding training with negative sampling.
//!
//! For a center token `c` and an observed context token `o` the training
//! loss of one pair is
//!
//! ```text
//! -log s(u_o . v_c) - sum_n log s(-u_n . v_c)
//! ```
//!
//! where `v` are input vectors, `u` output vectors, `s` the logistic
//! function, and the `n` are negatives drawn from the count^alpha unigram
//! distribution. Input vectors are the published embeddings.

use super::EmbeddingTable;
use crate::corpus::{VocabLevel, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{dot, sigmoid, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SkipgramConfig {
    /// Embedding width `v`.
    pub dim: usize,
    /// Context window half-width `c`: offsets `-c..=c` excluding 0.
    pub window: usize,
    /// Negatives drawn per observed pair.
    pub negatives: usize,
    /// Exponent of the negative-sampling unigram distribution.
    pub alpha: f64,
    /// Learning rate decays linearly per processed center token.
    pub lr_initial: f64,
    pub lr_final: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 50,
            window: 7,
            negatives: 5,
            alpha: 0.75,
            lr_initial: 0.03,
            lr_final: 0.0007,
            epochs: 15,
            seed: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "skip-gram dim, window, and epochs must all be at least 1",
            ));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "negative-sampling exponent must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.lr_initial.is_finite() && self.lr_final.is_finite())
            || self.lr_final <= 0.0
            || self.lr_initial < self.lr_final
        {
            return Err(Error::invalid(format!(
                "need lr_initial >= lr_final > 0, got {} and {}",
                self.lr_initial, self.lr_final
            )));
        }
        Ok(())
    }
}

/// Unigram distribution raised to `alpha` and normalized. Tokens with zero
/// count (the reserved markers unless they occur in a stream) get zero mass.
pub fn negative_sampling_distribution(vocab: &Vocabulary, alpha: f64) -> Result<Vec<f64>> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::invalid(format!(
            "negative-sampling exponent must be > 0, got {alpha}"
        )));
    }
    let weights: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| (c as f64).powf(alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid(
            "no token has a positive count, cannot sample negatives",
        ));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

struct NegativeSampler {
    cdf: Vec<f64>,
}

impl NegativeSampler {
    fn new(dist: &[f64]) -> Self {
        let mut cdf = Vec::with_capacity(dist.len());
        let mut acc = 0.0;
        for p in dist {
            acc += p;
            cdf.push(acc);
        }
        NegativeSampler { cdf }
    }

    fn draw(&self, rng: &mut impl Rng) -> u32 {
        let r: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= r);
        idx.min(self.cdf.len() - 1) as u32
    }
}

/// Loss of one (center, context, negatives) tuple under the current tables.
pub fn pair_loss(
    input: &Matrix,
    output: &Matrix,
    center: u32,
    context: u32,
    negatives: &[u32],
) -> f64 {
    let v = input.row(center as usize);
    let mut loss = -ln_sigmoid(dot(output.row(context as usize), v));
    for &n in negatives {
        loss -= ln_sigmoid(-dot(output.row(n as usize), v));
    }
    loss
}

/// Loss and dense gradients of [`pair_loss`] with respect to both tables.
/// Only the rows of `center`, `context`, and the negatives are nonzero.
pub fn pair_grads(
    input: &Matrix,
    output: &Matrix,
    center: u32,
    context: u32,
    negatives: &[u32],
) -> (f64, Matrix, Matrix) {
    let mut d_input = Matrix::zeros(input.rows(), input.cols());
    let mut d_output = Matrix::zeros(output.rows(), output.cols());
    let v = input.row(center as usize);
    let mut dv = vec![0.0; v.len()];
    let mut loss = 0.0;

    // d/dscore of -log s(score) is s(score) - 1; for -log s(-score) it is s(score).
    let mut apply = |token: u32, g: f64, d_output: &mut Matrix| {
        let u = output.row(token as usize);
        for (a, b) in dv.iter_mut().zip(u) {
            *a += g * b;
        }
        let row = d_output.row_mut(token as usize);
        for (a, b) in row.iter_mut().zip(v) {
            *a += g * b;
        }
    };

    let score = dot(output.row(context as usize), v);
    loss -= ln_sigmoid(score);
    apply(context, sigmoid(score) - 1.0, &mut d_output);
    for &n in negatives {
        let score = dot(output.row(n as usize), v);
        loss -= ln_sigmoid(-score);
        apply(n, sigmoid(score), &mut d_output);
    }

    let row = d_input.row_mut(center as usize);
    row.copy_from_slice(&dv);
    (loss, d_input, d_output)
}

/// In-place SGD update for one pair: the fused form of
/// `params -= lr * pair_grads(..)` used by the training loop.
fn pair_update(
    input: &mut Matrix,
    output: &mut Matrix,
    center: u32,
    context: u32,
    negatives: &[u32],
    lr: f64,
    dv: &mut [f64],
) {
    dv.fill(0.0);
    {
        let v = input.row(center as usize);
        let mut apply = |token: u32, g: f64, output: &mut Matrix| {
            let u = output.row_mut(token as usize);
            for ((a, du), vi) in dv.iter_mut().zip(u.iter_mut()).zip(v) {
                *a += g * *du;
                *du -= lr * g * vi;
            }
        };
        let g = sigmoid(dot(output.row(context as usize), v)) - 1.0;
        apply(context, g, output);
        for &n in negatives {
            let g = sigmoid(dot(output.row(n as usize), v));
            apply(n, g, output);
        }
    }
    let v = input.row_mut(center as usize);
    for (vi, d) in v.iter_mut().zip(dv.iter()) {
        *vi -= lr * d;
    }
}

fn ln_sigmoid(z: f64) -> f64 {
    // ln s(z) = -ln(1 + e^{-z}), computed without overflow for large |z|.
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Trains one embedding table over a flat token stream. Deterministic for a
/// fixed config: same seed, same table bits.
pub fn train_skipgram(
    tokens: &[u32],
    vocab: &Vocabulary,
    level: VocabLevel,
    cfg: &SkipgramConfig,
) -> Result<EmbeddingTable> {
    cfg.validate()?;
    if tokens.is_empty() {
        return Err(Error::invalid("cannot train embeddings on an empty stream"));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= vocab.len()) {
        return Err(Error::invalid(format!(
            "stream token id {bad} outside vocabulary of {}",
            vocab.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = 0.5 / cfg.dim as f64;
    let mut input = Matrix::uniform(vocab.len(), cfg.dim, -init, init, &mut rng);
    let mut output = Matrix::uniform(vocab.len(), cfg.dim, -init, init, &mut rng);

    let dist = negative_sampling_distribution(vocab, cfg.alpha)?;
    let sampler = NegativeSampler::new(&dist);

    let total = (tokens.len() * cfg.epochs) as f64;
    let mut processed = 0usize;
    let mut dv = vec![0.0; cfg.dim];
    let mut negatives = Vec::with_capacity(cfg.negatives);
    for _epoch in 0..cfg.epochs {
        for t in 0..tokens.len() {
            let frac = processed as f64 / total;
            let lr = (cfg.lr_initial + (cfg.lr_final - cfg.lr_initial) * frac).max(cfg.lr_final);
            processed += 1;
            let center = tokens[t];
            let lo = t.saturating_sub(cfg.window);
            let hi = (t + cfg.window).min(tokens.len() - 1);
            for ctx_pos in lo..=hi {
                if ctx_pos == t {
                    continue;
                }
                let context = tokens[ctx_pos];
                negatives.clear();
                for _ in 0..cfg.negatives {
                    let n = sampler.draw(&mut rng);
                    // A drawn negative equal to the observed context is skipped.
                    if n != context {
                        negatives.push(n);
                    }
                }
                pair_update(&mut input, &mut output, center, context, &negatives, lr, &mut dv);
            }
        }
    }
    Ok(EmbeddingTable::from_parts(level, input, output))
}

/// Mean log-probability of the probe pairs under the exact softmax over the
/// whole vocabulary: `mean log softmax(U v_c)[o]`. Small vocabularies only.
pub fn softmax_probe_objective(table: &EmbeddingTable, pairs: &[(u32, u32)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("probe set is empty"));
    }
    let mut total = 0.0;
    for &(center, context) in pairs {
        if center as usize >= table.len() || context as usize >= table.len() {
            return Err(Error::invalid(format!(
                "probe pair ({center}, {context}) outside table of {}",
                table.len()
            )));
        }
        let v = table.vector(center);
        let scores: Vec<f64> = (0..table.len())
            .map(|i| dot(table.output().row(i), v))
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += scores[context as usize] - log_z;
    }
    Ok(total / pairs.len() as f64)
}

/// Mean negated [`pair_loss`] over probe pairs with fixed negatives: the
/// negative-sampling surrogate of the training objective.
pub fn ns_probe_objective(
    table: &EmbeddingTable,
    pairs: &[(u32, u32)],
    negatives: &[Vec<u32>],
) -> Result<f64> {
    if pairs.is_empty() || pairs.len() != negatives.len() {
        return Err(Error::invalid(
            "probe pairs and negative lists must be non-empty and parallel",
        ));
    }
    let mut total = 0.0;
    for (&(center, context), negs) in pairs.iter().zip(negatives) {
        total -= pair_loss(table.input(), table.output(), center, context, negs);
    }
    Ok(total / pairs.len() as f64)
}

/// Cosine similarity between two published vectors.
pub fn cosine(table: &EmbeddingTable, a: u32, b: u32) -> Result<f64> {
    if a as usize >= table.len() || b as usize >= table.len() {
        return Err(Error::invalid(format!(
            "token ids ({a}, {b}) outside table of {}",
            table.len()
        )));
    }
    let (va, vb) = (table.vector(a), table.vector(b));
    let denom = dot(va, va).sqrt() * dot(vb, vb).sqrt();
    if denom == 0.0 {
        return Err(Error::invalid("cosine of a zero vector is undefined"));
    }
    Ok(dot(va, vb) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vocab_with_counts(entries: &[(&str, u64)]) -> Vocabulary {
        let mut tsv = String::from("<bos>\t0\t0\n<eos>\t1\t0\n<unk>\t2\t0\n");
        for (i, (token, count)) in entries.iter().enumerate() {
            tsv.push_str(&format!("{token}\t{}\t{count}\n", i + 3));
        }
        Vocabulary::from_tsv(&tsv).unwrap()
    }

    #[test]
    fn distribution_matches_hand_computation() {
        let vocab = vocab_with_counts(&[("a", 16), ("b", 1)]);
        let dist = negative_sampling_distribution(&vocab, 0.75).unwrap();
        assert_relative_eq!(dist[3], 8.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(dist[4], 1.0 / 9.0, epsilon = 1e-12);
        assert_eq!(&dist[0..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_counts_give_uniform_distribution() {
        let vocab = vocab_with_counts(&[("a", 3), ("b", 3), ("c", 3)]);
        let dist = negative_sampling_distribution(&vocab, 0.75).unwrap();
        for id in 3..6 {
            assert_relative_eq!(dist[id], 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn distribution_rejects_bad_inputs() {
        let vocab = vocab_with_counts(&[("a", 1)]);
        assert!(negative_sampling_distribution(&vocab, 0.0).is_err());
        assert!(negative_sampling_distribution(&vocab, f64::NAN).is_err());
        let empty = vocab_with_counts(&[]);
        assert!(negative_sampling_distribution(&empty, 0.75).is_err());
    }

    #[test]
    fn pair_gradients_match_finite_differences() {
        use crate::nn::grad_check;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (5, 3);
        let input = Matrix::uniform(n, d, -0.5, 0.5, &mut rng);
        let output = Matrix::uniform(n, d, -0.5, 0.5, &mut rng);
        let (center, context, negatives) = (0u32, 2u32, vec![1u32, 4, 4]);

        let (_, gi, go) = pair_grads(&input, &output, center, context, &negatives);
        let mut params: Vec<f64> = input.data().to_vec();
        params.extend_from_slice(output.data());
        let mut analytic: Vec<f64> = gi.data().to_vec();
        analytic.extend_from_slice(go.data());

        let max = grad_check(
            |flat| {
                let i = Matrix::from_vec(n, d, flat[..n * d].to_vec())?;
                let o = Matrix::from_vec(n, d, flat[n * d..].to_vec())?;
                Ok(pair_loss(&i, &o, center, context, &negatives))
            },
            &params,
            &analytic,
            1e-6,
        )
        .unwrap();
        assert!(max <= 1e-4, "max relative error {max}");
    }

    #[test]
    fn fused_update_equals_explicit_gradient_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, d) = (4, 3);
        let input = Matrix::uniform(n, d, -0.5, 0.5, &mut rng);
        let output = Matrix::uniform(n, d, -0.5, 0.5, &mut rng);
        let (center, context, negatives) = (1u32, 3u32, vec![0u32, 2]);
        let lr = 0.1;

        let (_, gi, go) = pair_grads(&input, &output, center, context, &negatives);
        let mut want_in = input.clone();
        let mut want_out = output.clone();
        for (p, g) in want_in.data_mut().iter_mut().zip(gi.data()) {
            *p -= lr * g;
        }
        for (p, g) in want_out.data_mut().iter_mut().zip(go.data()) {
            *p -= lr * g;
        }

        let mut got_in = input.clone();
        let mut got_out = output.clone();
        let mut dv = vec![0.0; d];
        pair_update(&mut got_in, &mut got_out, center, context, &negatives, lr, &mut dv);
        for (a, b) in got_in.data().iter().zip(want_in.data()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in got_out.data().iter().zip(want_out.data()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_and_improves_the_probe() {
        let vocab = vocab_with_counts(&[("a", 40), ("b", 40), ("c", 40), ("d", 40)]);
        // a/b alternate, then c/d alternate: ids 3,4 co-occur, 5,6 co-occur.
        let mut tokens = Vec::new();
        for _ in 0..40 {
            tokens.extend_from_slice(&[3, 4]);
        }
        for _ in 0..40 {
            tokens.extend_from_slice(&[5, 6]);
        }
        let cfg = SkipgramConfig {
            dim: 8,
            window: 2,
            epochs: 8,
            seed: 42,
            ..SkipgramConfig::default()
        };
        let t1 = train_skipgram(&tokens, &vocab, VocabLevel::Syllable, &cfg).unwrap();
        let t2 = train_skipgram(&tokens, &vocab, VocabLevel::Syllable, &cfg).unwrap();
        assert_eq!(t1.input().data(), t2.input().data());
        assert_eq!(t1.output().data(), t2.output().data());

        let pairs = [(3u32, 4u32), (4, 3), (5, 6), (6, 5)];
        let trained = softmax_probe_objective(&t1, &pairs).unwrap();

        // Reference point: the untrained initialization (epochs play no role).
        let init_cfg = SkipgramConfig { epochs: 1, ..cfg.clone() };
        let init = train_skipgram(&[3], &vocab, VocabLevel::Syllable, &init_cfg).unwrap();
        let before = softmax_probe_objective(&init, &pairs).unwrap();
        assert!(
            trained > before,
            "probe objective did not improve: {before} -> {trained}"
        );
    }

    #[test]
    fn rejects_out_of_vocabulary_stream() {
        let vocab = vocab_with_counts(&[("a", 1)]);
        let cfg = SkipgramConfig { dim: 4, ..SkipgramConfig::default() };
        assert!(train_skipgram(&[99], &vocab, VocabLevel::Syllable, &cfg).is_err());
        assert!(train_skipgram(&[], &vocab, VocabLevel::Syllable, &cfg).is_err());
    }
}
