//! Template-driven paraphrasing: tags plus a template go through the parse
//! generator, the full parse drives SynPG, and the output passes lexical
//! and semantic filters.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use thiserror::Error;

use crate::numerics::Tape;
use crate::parsegen::{generate_full_parse, ParseGeneratorModel};
use crate::parsekit::{parse_ptb_line, tag_sequence, LinearizedParse, ParseTree, Template};
use crate::synpg::{paraphrase, SynPGModel};
use crate::tokenizer::{encode, to_bag, TokenClass, TokenSequence};
use crate::transformer::{self, Provenance, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("n-gram overlap of an empty sequence")]
    EmptyInput,
    #[error("semantic representation has zero norm")]
    ZeroNorm,
    #[error("threshold out of range: {0}")]
    Threshold(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("batch line {line}: {message}")]
    BatchLine { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterThresholds {
    pub min_ngram_overlap: f64,
    /// Cosine scale, so negative values are meaningful.
    pub min_similarity: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_ngram_overlap: 0.3,
            min_similarity: 0.7,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.min_ngram_overlap) {
            return Err(PipelineError::Threshold(format!(
                "min_ngram_overlap {} not in [0, 1]",
                self.min_ngram_overlap
            )));
        }
        if !(-1.0..=1.0).contains(&self.min_similarity) {
            return Err(PipelineError::Threshold(format!(
                "min_similarity {} not in [-1, 1]",
                self.min_similarity
            )));
        }
        Ok(())
    }

    /// Thresholds that every candidate passes.
    pub fn disabled() -> Self {
        Self {
            min_ngram_overlap: 0.0,
            min_similarity: -1.0,
        }
    }
}

/// Why a candidate was not emitted.
#[derive(Clone, Debug, PartialEq)]
pub enum Rejection {
    /// The parse generator produced no valid full parse.
    ParseFailure(String),
    /// SynPG failed on a valid parse.
    GenerationFailure(String),
    OverlapTooLow(f64),
    SimilarityTooLow(f64),
}

impl Rejection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rejection::ParseFailure(_) => "parse-failure",
            Rejection::GenerationFailure(_) => "generation-failure",
            Rejection::OverlapTooLow(_) => "overlap-too-low",
            Rejection::SimilarityTooLow(_) => "similarity-too-low",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::ParseFailure(m) | Rejection::GenerationFailure(m) => {
                write!(f, "{}: {m}", self.as_str())
            }
            Rejection::OverlapTooLow(v) | Rejection::SimilarityTooLow(v) => {
                write!(f, "{} ({v:.4})", self.as_str())
            }
        }
    }
}

fn ngram_counts<T: Eq + Hash>(xs: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    for w in xs.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Mean over n = 1, 2 of the multiset n-gram intersection size divided by
/// the larger n-gram count. When either side has a single token only
/// unigrams are used.
pub fn ngram_overlap<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, PipelineError> {
    if a.is_empty() || b.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let orders = if a.len() == 1 || b.len() == 1 { 1 } else { 2 };
    let mut total = 0.0;
    for n in 1..=orders {
        let ca = ngram_counts(a, n);
        let cb = ngram_counts(b, n);
        let shared: usize = ca.iter().map(|(g, &k)| k.min(cb.get(g).copied().unwrap_or(0))).sum();
        let denom = (a.len() + 1 - n).max(b.len() + 1 - n);
        total += shared as f64 / denom as f64;
    }
    Ok(total / orders as f64)
}

fn pooled_semantics(model: &SynPGModel, seq: &TokenSequence) -> Result<Vec<f64>, PipelineError> {
    let bag = to_bag(seq).map_err(|e| PipelineError::Model(e.to_string()))?;
    let mut tape = Tape::new();
    let b = model
        .params
        .bind(&mut tape, false)
        .map_err(|e| PipelineError::Model(e.to_string()))?;
    let out = transformer::encode(&mut tape, &b, &model.config, Provenance::Semantic, bag.ids(), false)
        .map_err(|e| PipelineError::Model(e.to_string()))?
        .ok_or(PipelineError::ZeroNorm)?;
    let t = tape.value(out);
    let d = t.cols();
    let mut mean = vec![0.0; d];
    for row in t.values().chunks(d) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    let n = t.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Cosine between mean-pooled semantic-encoder outputs of two word
/// sequences, read as bags without positions or dropout.
pub fn similarity_proxy(
    model: &SynPGModel,
    a: &TokenSequence,
    b: &TokenSequence,
) -> Result<f64, PipelineError> {
    let pa = pooled_semantics(model, a)?;
    let pb = pooled_semantics(model, b)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&pa), norm(&pb));
    if na == 0.0 || nb == 0.0 {
        return Err(PipelineError::ZeroNorm);
    }
    let dot: f64 = pa.iter().zip(&pb).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Passes iff both the n-gram overlap and the similarity proxy reach their
/// thresholds. An empty side fails the overlap check.
pub fn postprocess_filter(
    source: &TokenSequence,
    candidate: &TokenSequence,
    model: &SynPGModel,
    thresholds: &FilterThresholds,
) -> Result<(), Rejection> {
    let overlap = ngram_overlap(&source.ids, &candidate.ids).unwrap_or(0.0);
    if overlap < thresholds.min_ngram_overlap {
        return Err(Rejection::OverlapTooLow(overlap));
    }
    let sim = similarity_proxy(model, source, candidate).unwrap_or(-1.0);
    if sim < thresholds.min_similarity {
        return Err(Rejection::SimilarityTooLow(sim));
    }
    Ok(())
}

/// An accepted pipeline output.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateParaphrase {
    /// Full parse produced by the parse generator.
    pub parse: LinearizedParse,
    pub paraphrase: TokenSequence,
}

/// Generates a paraphrase of `sentence` following `template`: the full
/// parse comes from the parse generator fed with the source tags, SynPG
/// renders it, and the result must pass [`postprocess_filter`].
pub fn paraphrase_from_template(
    synpg: &SynPGModel,
    parsegen: &ParseGeneratorModel,
    sentence: &TokenSequence,
    source_tree: &ParseTree,
    template: &Template,
    thresholds: &FilterThresholds,
) -> Result<TemplateParaphrase, Rejection> {
    let tags = tag_sequence(source_tree);
    let parse = generate_full_parse(parsegen, &tags, template, Strategy::Greedy)
        .map_err(|e| Rejection::ParseFailure(e.to_string()))?;
    let out = paraphrase(synpg, sentence, &parse, Strategy::Greedy)
        .map_err(|e| Rejection::GenerationFailure(e.to_string()))?;
    postprocess_filter(sentence, &out, synpg, thresholds)?;
    Ok(TemplateParaphrase {
        parse,
        paraphrase: out,
    })
}

/// Runs the pipeline over `sentence<TAB>ptb-parse<TAB>template` lines and
/// renders `source<TAB>paraphrase<TAB>status` lines; status is `ok` or the
/// rejection reason, with an empty paraphrase field on rejection. Blank
/// lines are skipped; a malformed line is an error.
pub fn run_batch(
    synpg: &SynPGModel,
    parsegen: &ParseGeneratorModel,
    input: &str,
    thresholds: &FilterThresholds,
) -> Result<String, PipelineError> {
    thresholds.validate()?;
    let mut out = String::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| PipelineError::BatchLine { line: i + 1, message };
        let fields: Vec<&str> = line.split('\t').collect();
        let [sentence, ptb, template] = fields[..] else {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let tree = parse_ptb_line(ptb).map_err(|e| bad(e.to_string()))?;
        let template: Template = template.parse().map_err(|e: crate::parsekit::StructureError| bad(e.to_string()))?;
        let words: Vec<&str> = sentence.split_whitespace().collect();
        let seq = encode(&words, &synpg.vocab, TokenClass::Word);
        let (text, status) = match paraphrase_from_template(synpg, parsegen, &seq, &tree, &template, thresholds) {
            Ok(p) => (synpg.decode_words(&p.paraphrase).join(" "), "ok"),
            Err(r) => (String::new(), r.as_str()),
        };
        out.push_str(&format!("{sentence}\t{text}\t{status}\n"));
    }
    Ok(out)
}
