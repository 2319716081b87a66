use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::tokenizer::{encode, TokenClass, Vocab, RESERVED};

use super::{SynPGModel, SynpgError};
use crate::transformer::ModelError;

/// Settings for [`corpus_embeddings`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorpusEmbeddingConfig {
    /// Context offsets `±1..=window`, each direction and distance a separate
    /// context slot.
    pub window: usize,
    /// Weight of the distributional direction against a random per-word
    /// direction; 0 gives purely random vectors.
    pub blend: f64,
    pub seed: u64,
}

impl Default for CorpusEmbeddingConfig {
    fn default() -> Self {
        Self {
            window: 2,
            blend: 0.4,
            seed: 0,
        }
    }
}

/// Word vectors estimated from a tokenized corpus, in the role GloVe plays
/// for the full-scale model. Each word's positive PMI row over positional
/// contexts is randomly projected to `dim` coordinates and blended with a
/// random identity direction, so words of one class share a direction but
/// stay distinguishable. Rows have norm `sqrt(dim)`, the scale
/// [`load_pretrained_embeddings`] expects. Reserved tokens are omitted.
pub fn corpus_embeddings<S: AsRef<str>>(
    sentences: &[Vec<S>],
    vocab: &Vocab,
    dim: usize,
    cfg: &CorpusEmbeddingConfig,
) -> Result<Vec<(String, Vec<f64>)>, SynpgError> {
    if dim == 0 || cfg.window == 0 || !(0.0..=1.0).contains(&cfg.blend) {
        return Err(SynpgError::Config(
            "embedding dim and window must be positive, blend in [0, 1]".into(),
        ));
    }
    let v = vocab.words.len();
    let slots = 2 * cfg.window;
    let cols = v * slots;
    let mut counts = vec![0.0f64; v * cols];
    for words in sentences {
        let ids = encode(words, vocab, TokenClass::Word).ids;
        for (i, &a) in ids.iter().enumerate() {
            for dist in 1..=cfg.window {
                let slot = 2 * (dist - 1);
                if i >= dist {
                    counts[a * cols + slot * v + ids[i - dist]] += 1.0;
                }
                if let Some(&b) = ids.get(i + dist) {
                    counts[a * cols + (slot + 1) * v + b] += 1.0;
                }
            }
        }
    }
    let total: f64 = counts.iter().sum();
    let row_sum: Vec<f64> = counts.chunks(cols).map(|r| r.iter().sum()).collect();
    let mut col_sum = vec![0.0; cols];
    for row in counts.chunks(cols) {
        col_sum.iter_mut().zip(row).for_each(|(c, x)| *c += x);
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let projection: Vec<f64> = (0..cols * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let unit = |x: Vec<f64>| {
        let n = x.iter().map(|e| e * e).sum::<f64>().sqrt();
        if n > 0.0 {
            x.into_iter().map(|e| e / n).collect()
        } else {
            x
        }
    };
    let target_norm = (dim as f64).sqrt();
    let mut rows = Vec::with_capacity(v.saturating_sub(RESERVED.len()));
    for (a, token) in vocab.words.tokens().iter().enumerate().skip(RESERVED.len()) {
        let identity = unit((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut dist = vec![0.0; dim];
        for (c, &x) in counts[a * cols..(a + 1) * cols].iter().enumerate() {
            if x > 0.0 {
                let ppmi = (x * total / (row_sum[a] * col_sum[c])).ln().max(0.0);
                let p = &projection[c * dim..(c + 1) * dim];
                dist.iter_mut().zip(p).for_each(|(d, w)| *d += ppmi * w);
            }
        }
        let dist = unit(dist);
        let mixed = unit(
            identity
                .iter()
                .zip(&dist)
                .map(|(r, u)| (1.0 - cfg.blend) * r + cfg.blend * u)
                .collect(),
        );
        rows.push((token.clone(), mixed.into_iter().map(|x| x * target_norm).collect()));
    }
    Ok(rows)
}

/// Renders vectors in the whitespace text format read by
/// [`load_pretrained_embeddings`].
pub fn format_embeddings(rows: &[(String, Vec<f64>)]) -> String {
    let mut s = String::new();
    for (word, values) in rows {
        s.push_str(word);
        for x in values {
            let _ = write!(s, " {x}");
        }
        s.push('\n');
    }
    s
}

/// Overwrites word-embedding rows from whitespace text lines
/// `word v1 v2 … vd`. Words outside the vocabulary are skipped; rows are
/// scaled by `1/sqrt(d)` to match the model's input scaling, and the
/// matching output-projection columns are reset to the new rows, as at
/// initialization. Returns the number of rows replaced.
pub fn load_pretrained_embeddings(model: &mut SynPGModel, text: &str) -> Result<usize, SynpgError> {
    let d = model.config.d_model;
    let v = model.config.vocab(TokenClass::Word);
    let mut loaded = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values = parts
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| SynpgError::Config(format!("embedding line {}: {e}", lineno + 1)))?;
        if values.len() != d {
            return Err(ModelError::Width {
                expected: d,
                got: values.len(),
            }
            .into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SynpgError::Config(format!("embedding line {}: non-finite value", lineno + 1)));
        }
        if let Some(id) = model.vocab.table(TokenClass::Word).id(&word.to_lowercase()) {
            loaded.push((id, values));
        }
    }
    let scale = 1.0 / (d as f64).sqrt();
    let table = model.params.get_mut("emb.word")?.values_mut();
    for (id, values) in &loaded {
        let row = &mut table[id * d..(id + 1) * d];
        row.iter_mut().zip(values).for_each(|(r, x)| *r = x * scale);
    }
    if model.config.layout.out == TokenClass::Word {
        let out = model.params.get_mut("out.w")?.values_mut();
        for (id, values) in &loaded {
            for (j, x) in values.iter().enumerate() {
                out[j * v + id] = x * scale;
            }
        }
    }
    Ok(loaded.len())
}
