//! Run configuration: TOML file merged under command-line overrides.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use synpg::pipeline::FilterThresholds;
use synpg::synpg::{CorpusEmbeddingConfig, TrainingConfig};
use synpg::transformer::{Layout, ModelConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub filter: FilterSection,
    pub augment: AugmentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Tree depth limit for grammar sampling.
    pub max_depth: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { max_depth: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers_enc_sem: usize,
    pub n_layers_enc_syn: usize,
    pub n_layers_dec: usize,
    pub d_ffn: usize,
    pub max_word_len: usize,
    pub max_parse_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let c = ModelConfig::desk(Layout::SYNPG, 5, 5, 5);
        Self {
            d_model: c.d_model,
            n_heads: c.n_heads,
            n_layers_enc_sem: c.n_layers_enc_sem,
            n_layers_enc_syn: c.n_layers_enc_syn,
            n_layers_dec: c.n_layers_dec,
            d_ffn: c.d_ffn,
            max_word_len: c.max_word_len,
            max_parse_len: c.max_parse_len,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, layout: Layout, word: usize, parse: usize, tag: usize) -> ModelConfig {
        let mut c = ModelConfig::desk(layout, word, parse, tag);
        c.d_model = self.d_model;
        c.n_heads = self.n_heads;
        c.n_layers_enc_sem = self.n_layers_enc_sem;
        c.n_layers_enc_syn = self.n_layers_enc_syn;
        c.n_layers_dec = self.n_layers_dec;
        c.d_ffn = self.d_ffn;
        c.max_word_len = self.max_word_len;
        c.max_parse_len = self.max_parse_len;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub word_dropout: f64,
    pub batch_size: usize,
    pub resample_dropout: bool,
    pub min_count: usize,
    pub max_vocab: usize,
    /// `corpus`, `random`, or a path to whitespace-format vectors.
    pub embeddings: String,
    pub embedding_blend: f64,
    pub embedding_window: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        let e = CorpusEmbeddingConfig::default();
        Self {
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            word_dropout: t.word_dropout,
            batch_size: t.batch_size,
            resample_dropout: t.resample_dropout,
            min_count: 1,
            max_vocab: 50_000,
            embeddings: "corpus".into(),
            embedding_blend: e.blend,
            embedding_window: e.window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub min_ngram_overlap: f64,
    pub min_similarity: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterThresholds::default();
        Self {
            min_ngram_overlap: f.min_ngram_overlap,
            min_similarity: f.min_similarity,
        }
    }
}

impl FilterSection {
    pub fn thresholds(&self) -> FilterThresholds {
        FilterThresholds {
            min_ngram_overlap: self.min_ngram_overlap,
            min_similarity: self.min_similarity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub k: usize,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self { k: 4 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn training(&self) -> TrainingConfig {
        let t = &self.train;
        TrainingConfig {
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            word_dropout: t.word_dropout,
            batch_size: t.batch_size,
            seed: self.seed,
            max_word_len: self.model.max_word_len,
            max_parse_len: self.model.max_parse_len,
            resample_dropout: t.resample_dropout,
        }
    }

    pub fn embedding(&self) -> CorpusEmbeddingConfig {
        CorpusEmbeddingConfig {
            window: self.train.embedding_window,
            blend: self.train.embedding_blend,
            seed: self.seed,
        }
    }

    /// Prints the effective configuration as commented TOML.
    pub fn echo(&self) {
        let text = toml::to_string(self).expect("config serializes");
        println!("# effective config");
        for line in text.lines() {
            println!("#   {line}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.train.learning_rate, 1e-4);
        assert_eq!(c.model.max_word_len, 40);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nlearning_rat = 0.1\n").is_err());
        assert!(toml::from_str::<RunConfig>("sed = 3\n").is_err());
        let c: RunConfig = toml::from_str("seed = 3\n[train]\nepochs = 2\n").unwrap();
        assert_eq!((c.seed, c.train.epochs, c.train.word_dropout), (3, 2, 0.4));
    }
}
