//! Flat key=value run configuration.
//!
//! A config file holds one `key=value` per line; `#` starts a comment.
//! Command-line `--set key=value` pairs are applied after the file, so flags
//! win. Artifacts land in a directory named after a hash of every setting
//! except `scheme`: the four composition schemes write differently named
//! checkpoints and can share one run directory, while any other change gets a
//! fresh one.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ltmn::CompositionScheme;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Corpus file the commands read. Must be set before use.
    pub corpus: String,
    /// Embedding composition scheme. Excluded from the run-directory hash.
    pub scheme: CompositionScheme,
    /// Embedding width per level.
    pub dim: usize,
    /// Skip-gram context half-width.
    pub window: usize,
    /// Negatives per observed pair.
    pub negatives: usize,
    /// Negative-sampling distribution exponent.
    pub alpha: f64,
    pub emb_lr: f64,
    pub emb_lr_final: f64,
    pub emb_epochs: usize,
    /// Tokens rarer than this fold into the unknown id.
    pub min_count: u64,
    pub hidden: usize,
    pub attn_dim: usize,
    pub attr_emb_dim: usize,
    /// Adam learning rate for both sequence models.
    pub lr: f64,
    /// Apply the stepped decay schedule on top of `lr`.
    pub lr_decay: bool,
    pub batch: usize,
    pub lm_epochs: usize,
    pub ltmn_epochs: usize,
    /// Sampling temperature for lyric generation.
    pub tau: f64,
    pub seed: u64,
    /// Pool size for the uniform lyrics baseline.
    pub top_k: usize,
    /// Lyric lines to generate or sample.
    pub lines: usize,
    /// Cap on generated lyric tokens across all lines.
    pub max_len: usize,
    /// Sample melody attributes instead of taking each argmax.
    pub melody_sample: bool,
    pub tempo: u32,
    pub resolution: u16,
    /// Parameter initialization half-width for the sequence models.
    pub init_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: String::new(),
            scheme: CompositionScheme::Se,
            dim: 50,
            window: 7,
            negatives: 5,
            alpha: 0.75,
            emb_lr: 0.03,
            emb_lr_final: 0.0007,
            emb_epochs: 15,
            min_count: 1,
            hidden: 128,
            attn_dim: 128,
            attr_emb_dim: 128,
            lr: 1e-4,
            lr_decay: true,
            batch: 32,
            lm_epochs: 60,
            ltmn_epochs: 60,
            tau: 0.8,
            seed: 1,
            top_k: 50,
            lines: 4,
            max_len: 120,
            melody_sample: false,
            tempo: 120,
            resolution: 480,
            init_scale: 0.08,
        }
    }
}

/// Key order used for the canonical serialization. `scheme` is absent on
/// purpose; see the module docs.
const HASHED_KEYS: [&str; 26] = [
    "corpus",
    "dim",
    "window",
    "negatives",
    "alpha",
    "emb_lr",
    "emb_lr_final",
    "emb_epochs",
    "min_count",
    "hidden",
    "attn_dim",
    "attr_emb_dim",
    "lr",
    "lr_decay",
    "batch",
    "lm_epochs",
    "ltmn_epochs",
    "tau",
    "seed",
    "top_k",
    "lines",
    "max_len",
    "melody_sample",
    "tempo",
    "resolution",
    "init_scale",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("config key {key}: cannot parse {value:?}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("config key {key}: expected true or false, got {value:?}")),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "corpus" => self.corpus = value.to_string(),
            "scheme" => self.scheme = CompositionScheme::parse(value).map_err(|e| e.to_string())?,
            "dim" => self.dim = parse_num(key, value)?,
            "window" => self.window = parse_num(key, value)?,
            "negatives" => self.negatives = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "emb_lr" => self.emb_lr = parse_num(key, value)?,
            "emb_lr_final" => self.emb_lr_final = parse_num(key, value)?,
            "emb_epochs" => self.emb_epochs = parse_num(key, value)?,
            "min_count" => self.min_count = parse_num(key, value)?,
            "hidden" => self.hidden = parse_num(key, value)?,
            "attn_dim" => self.attn_dim = parse_num(key, value)?,
            "attr_emb_dim" => self.attr_emb_dim = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "lr_decay" => self.lr_decay = parse_bool(key, value)?,
            "batch" => self.batch = parse_num(key, value)?,
            "lm_epochs" => self.lm_epochs = parse_num(key, value)?,
            "ltmn_epochs" => self.ltmn_epochs = parse_num(key, value)?,
            "tau" => self.tau = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "top_k" => self.top_k = parse_num(key, value)?,
            "lines" => self.lines = parse_num(key, value)?,
            "max_len" => self.max_len = parse_num(key, value)?,
            "melody_sample" => self.melody_sample = parse_bool(key, value)?,
            "tempo" => self.tempo = parse_num(key, value)?,
            "resolution" => self.resolution = parse_num(key, value)?,
            "init_scale" => self.init_scale = parse_num(key, value)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "corpus" => self.corpus.clone(),
            "dim" => self.dim.to_string(),
            "window" => self.window.to_string(),
            "negatives" => self.negatives.to_string(),
            "alpha" => self.alpha.to_string(),
            "emb_lr" => self.emb_lr.to_string(),
            "emb_lr_final" => self.emb_lr_final.to_string(),
            "emb_epochs" => self.emb_epochs.to_string(),
            "min_count" => self.min_count.to_string(),
            "hidden" => self.hidden.to_string(),
            "attn_dim" => self.attn_dim.to_string(),
            "attr_emb_dim" => self.attr_emb_dim.to_string(),
            "lr" => self.lr.to_string(),
            "lr_decay" => self.lr_decay.to_string(),
            "batch" => self.batch.to_string(),
            "lm_epochs" => self.lm_epochs.to_string(),
            "ltmn_epochs" => self.ltmn_epochs.to_string(),
            "tau" => self.tau.to_string(),
            "seed" => self.seed.to_string(),
            "top_k" => self.top_k.to_string(),
            "lines" => self.lines.to_string(),
            "max_len" => self.max_len.to_string(),
            "melody_sample" => self.melody_sample.to_string(),
            "tempo" => self.tempo.to_string(),
            "resolution" => self.resolution.to_string(),
            "init_scale" => self.init_scale.to_string(),
            _ => unreachable!("get called with unlisted key {key}"),
        }
    }

    /// Applies a config file on top of the defaults already in `self`.
    pub fn load_file(&mut self, path: &Path) -> Result<(), String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!("{} line {}: expected key=value", path.display(), i + 1)
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies `--set key=value` overrides; these run after any file.
    pub fn apply_sets(&mut self, sets: &[String]) -> Result<(), String> {
        for pair in sets {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| format!("--set {pair:?}: expected key=value"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive_dims = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("emb_epochs", self.emb_epochs),
            ("hidden", self.hidden),
            ("attn_dim", self.attn_dim),
            ("attr_emb_dim", self.attr_emb_dim),
            ("batch", self.batch),
            ("lm_epochs", self.lm_epochs),
            ("ltmn_epochs", self.ltmn_epochs),
            ("top_k", self.top_k),
            ("lines", self.lines),
            ("max_len", self.max_len),
        ];
        for (key, v) in positive_dims {
            if v == 0 {
                return Err(format!("config key {key} must be at least 1"));
            }
        }
        let positive_floats = [
            ("alpha", self.alpha),
            ("emb_lr", self.emb_lr),
            ("emb_lr_final", self.emb_lr_final),
            ("lr", self.lr),
            ("tau", self.tau),
            ("init_scale", self.init_scale),
        ];
        for (key, v) in positive_floats {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("config key {key} must be a positive finite number"));
            }
        }
        if self.emb_lr_final > self.emb_lr {
            return Err("emb_lr_final cannot exceed emb_lr".into());
        }
        if self.tempo == 0 {
            return Err("config key tempo must be at least 1".into());
        }
        // Durations and rests step in eighths of a quarter note, so tick
        // counts are exact only when the resolution divides by 8.
        if self.resolution == 0 || self.resolution > 0x7fff || self.resolution % 8 != 0 {
            return Err("config key resolution must be a positive multiple of 8 below 32768".into());
        }
        Ok(())
    }

    /// Canonical serialization of everything that keys the run directory.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in HASHED_KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key));
        }
        out
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self, root: &Path) -> PathBuf {
        root.join(format!("run-{}", self.hash()))
    }
}
