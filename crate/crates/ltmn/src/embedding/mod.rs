//! Token embedding tables, their text serialization, and the embedder that
//! turns corpus or generated syllable streams into composed input vectors.

mod compose;
mod skipgram;

pub use compose::{compose, composed_dim, project, CompositionScheme};
pub use skipgram::{
    cosine, negative_sampling_distribution, ns_probe_objective, pair_grads, pair_loss,
    softmax_probe_objective, train_skipgram, SkipgramConfig,
};

use crate::corpus::{AlignedSong, VocabLevel, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use std::fmt::Write as _;
use std::path::Path;

/// Embeddings for one vocabulary level. `input` rows are the published
/// vectors consumed downstream; `output` rows are the context vectors that
/// only matter during training and are not persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    level: VocabLevel,
    input: Matrix,
    output: Matrix,
}

impl EmbeddingTable {
    pub(crate) fn from_parts(level: VocabLevel, input: Matrix, output: Matrix) -> Self {
        assert_eq!(input.rows(), output.rows());
        assert_eq!(input.cols(), output.cols());
        EmbeddingTable {
            level,
            input,
            output,
        }
    }

    pub fn level(&self) -> VocabLevel {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    /// Number of token rows; always equals the vocabulary size.
    pub fn len(&self) -> usize {
        self.input.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Published vector of one token id.
    pub fn vector(&self, id: u32) -> &[f64] {
        self.input.row(id as usize)
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Text export: a `<count> <dim>` header line, then one
    /// `token v_1 .. v_dim` line per token in id order. Values use the
    /// shortest decimal form that round-trips exactly.
    pub fn to_text(&self, vocab: &Vocabulary) -> Result<String> {
        if vocab.len() != self.len() {
            return Err(Error::shape(format!(
                "table has {} rows but vocabulary has {} tokens",
                self.len(),
                vocab.len()
            )));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.len(), self.dim());
        for id in 0..self.len() as u32 {
            out.push_str(vocab.token(id)?);
            for v in self.vector(id) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses [`Self::to_text`] output. Rows may appear in any order but
    /// every vocabulary token must appear exactly once; output vectors are
    /// zeroed since only published vectors are persisted.
    pub fn from_text(text: &str, vocab: &Vocabulary, level: VocabLevel) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty embedding file"))?;
        let mut parts = header.split_whitespace();
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "header must be '<count> <dim>'"))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "header must be '<count> <dim>'"))?;
        if count != vocab.len() {
            return Err(Error::invalid(format!(
                "embedding file has {count} tokens but vocabulary has {}",
                vocab.len()
            )));
        }
        let mut input = Matrix::zeros(count, dim);
        let mut seen = vec![false; count];
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| Error::parse(idx + 1, "missing token"))?;
            let id = vocab
                .lookup(token)
                .ok_or_else(|| Error::parse(idx + 1, format!("token {token:?} not in vocabulary")))?;
            if seen[id as usize] {
                return Err(Error::parse(idx + 1, format!("duplicate token {token:?}")));
            }
            seen[id as usize] = true;
            let row = input.row_mut(id as usize);
            let mut n = 0;
            for field in fields {
                if n >= dim {
                    return Err(Error::parse(idx + 1, format!("more than {dim} values")));
                }
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(idx + 1, format!("bad value {field:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(idx + 1, format!("non-finite value {field:?}")));
                }
                row[n] = v;
                n += 1;
            }
            if n != dim {
                return Err(Error::parse(idx + 1, format!("expected {dim} values, got {n}")));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "embedding file is missing token {:?}",
                vocab.token(missing as u32)?
            )));
        }
        let output = Matrix::zeros(count, dim);
        Ok(EmbeddingTable {
            level,
            input,
            output,
        })
    }

    pub fn save(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text(vocab)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary, level: VocabLevel) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, vocab, level)
    }
}

/// Both embedding levels plus a composition scheme: everything needed to
/// turn syllable token streams into model input vectors.
#[derive(Debug, Clone)]
pub struct Embedder {
    pub scheme: CompositionScheme,
    pub syl_vocab: Vocabulary,
    pub word_vocab: Vocabulary,
    pub syl_table: EmbeddingTable,
    pub word_table: EmbeddingTable,
}

impl Embedder {
    pub fn new(
        scheme: CompositionScheme,
        syl_vocab: Vocabulary,
        word_vocab: Vocabulary,
        syl_table: EmbeddingTable,
        word_table: EmbeddingTable,
    ) -> Result<Self> {
        if syl_table.len() != syl_vocab.len() || word_table.len() != word_vocab.len() {
            return Err(Error::shape(format!(
                "table sizes {}x{} do not match vocabularies {}x{}",
                syl_table.len(),
                word_table.len(),
                syl_vocab.len(),
                word_vocab.len()
            )));
        }
        if syl_table.dim() != word_table.dim() {
            return Err(Error::shape(format!(
                "syllable dim {} differs from word dim {}",
                syl_table.dim(),
                word_table.dim()
            )));
        }
        Ok(Embedder {
            scheme,
            syl_vocab,
            word_vocab,
            syl_table,
            word_table,
        })
    }

    /// Width of the composed vectors this embedder produces.
    pub fn dim(&self) -> usize {
        composed_dim(self.scheme, self.syl_table.dim())
    }

    /// Composes one syllable with its word. An unknown word (including a
    /// word still being generated) falls back to the syllable vector for
    /// the word slot.
    pub fn embed(&self, syllable_id: u32, word: Option<&str>) -> Result<Vec<f64>> {
        if syllable_id as usize >= self.syl_table.len() {
            return Err(Error::invalid(format!(
                "syllable id {syllable_id} outside vocabulary of {}",
                self.syl_vocab.len()
            )));
        }
        let s = self.syl_table.vector(syllable_id);
        let w = word
            .and_then(|text| self.word_vocab.lookup(text))
            .map(|id| self.word_table.vector(id))
            .unwrap_or(s);
        compose(self.scheme, s, w)
    }

    /// Composed vectors for every syllable of a corpus song, pairing each
    /// syllable with its full word.
    pub fn embed_song(&self, song: &AlignedSong) -> Result<Vec<Vec<f64>>> {
        let tokens = song.syllable_tokens();
        let words = song.word_of_each_syllable();
        tokens
            .iter()
            .zip(&words)
            .map(|(t, w)| self.embed(self.syl_vocab.id(t), Some(w)))
            .collect()
    }

    /// Composed vectors for a generated token stream. Words are resolved
    /// incrementally: a word-final syllable sees its completed word, earlier
    /// syllables see the (usually unknown) prefix and fall back.
    pub fn embed_stream(&self, tokens: &[u32]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut stream = StreamEmbedder::new(self);
        for &t in tokens {
            out.push(stream.push(t)?);
        }
        Ok(out)
    }
}

/// Incremental embedding of a growing token stream, tracking the word under
/// construction so word-final syllables can use their completed word.
pub struct StreamEmbedder<'a> {
    embedder: &'a Embedder,
    parts: Vec<String>,
}

impl<'a> StreamEmbedder<'a> {
    pub fn new(embedder: &'a Embedder) -> Self {
        StreamEmbedder {
            embedder,
            parts: Vec::new(),
        }
    }

    pub fn push(&mut self, token_id: u32) -> Result<Vec<f64>> {
        let token = self.embedder.syl_vocab.token(token_id)?.to_string();
        if let Some(part) = token.strip_suffix('|') {
            // Word continues: embed against the incomplete prefix.
            self.parts.push(part.to_string());
            let prefix = self.parts.concat();
            self.embedder.embed(token_id, Some(&prefix))
        } else if token.starts_with('<') && token.ends_with('>') {
            // Reserved marker: no word context, resets any open word.
            self.parts.clear();
            self.embedder.embed(token_id, None)
        } else {
            self.parts.push(token.clone());
            let word = self.parts.concat();
            self.parts.clear();
            self.embedder.embed(token_id, Some(&word))
        }
    }
}

/// Regroups a generated marked-syllable token stream into words: syllables
/// accumulate until a token without the `|` continuation marker.
pub fn regroup_words(vocab: &Vocabulary, tokens: &[u32]) -> Result<Vec<String>> {
    let mut words = Vec::new();
    let mut parts: Vec<String> = Vec::new();
    for &t in tokens {
        let token = vocab.token(t)?;
        if let Some(part) = token.strip_suffix('|') {
            parts.push(part.to_string());
        } else {
            parts.push(token.to_string());
            words.push(parts.concat());
            parts.clear();
        }
    }
    if !parts.is_empty() {
        // Stream ended mid-word; emit what accumulated.
        words.push(parts.concat());
    }
    Ok(words)
}
