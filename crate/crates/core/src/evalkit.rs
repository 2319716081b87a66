//! Corpus BLEU, template matching accuracy, and paired-corpus evaluation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use thiserror::Error;

use crate::parsegen::ParseGeneratorModel;
use crate::parsekit::{cky_parse, extract_template, linearize, Grammar, ParseTree};
use crate::pipeline::{paraphrase_from_template, FilterThresholds};
use crate::synpg::{paraphrase, SynPGModel};
use crate::tokenizer::{encode, TokenClass};
use crate::transformer::Strategy;

/// Numerator used for n-gram orders with no clipped match.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("hypothesis and reference counts differ ({hyps} vs {refs})")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("{0} mode needs a SynPG model")]
    MissingModel(&'static str),
    #[error("template mode needs a parse generator")]
    MissingParseGenerator,
}

fn counts<T: Eq + Hash>(xs: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    for w in xs.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Corpus BLEU over n = 1..=4 with a single reference per hypothesis.
/// Orders with zero clipped matches get [`BLEU_EPSILON`] as numerator
/// (over a denominator of at least 1).
pub fn bleu_corpus<T: Eq + Hash>(hyps: &[Vec<T>], refs: &[Vec<T>]) -> Result<f64, EvalError> {
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut matched = [0usize; BLEU_MAX_ORDER];
    let mut total = [0usize; BLEU_MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=BLEU_MAX_ORDER {
            let rc = counts(r, n);
            matched[n - 1] += counts(h, n)
                .iter()
                .map(|(g, &k)| k.min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
            total[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..BLEU_MAX_ORDER)
        .map(|i| {
            let num = if matched[i] == 0 { BLEU_EPSILON } else { matched[i] as f64 };
            (num / total[i].max(1) as f64).ln()
        })
        .sum::<f64>()
        / BLEU_MAX_ORDER as f64;
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(bp * log_precision.exp())
}

/// Percentage of pairs whose hypothesis template equals the reference
/// template; a missing hypothesis never matches.
pub fn template_matching_accuracy(
    hyps: &[Option<ParseTree>],
    refs: &[ParseTree],
) -> Result<f64, EvalError> {
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if refs.is_empty() {
        return Err(EvalError::Empty);
    }
    let matches = hyps
        .iter()
        .zip(refs)
        .filter(|(h, r)| h.as_ref().is_some_and(|h| template_key(h) == template_key(r)))
        .count();
    Ok(100.0 * matches as f64 / refs.len() as f64)
}

fn template_key(t: &ParseTree) -> String {
    extract_template(t).to_string()
}

/// Probability that two independent draws from `trees` share a template:
/// the TMA expected from outputs unrelated to the requested template.
pub fn template_chance_rate(trees: &[ParseTree]) -> f64 {
    if trees.is_empty() {
        return 0.0;
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for t in trees {
        *freq.entry(template_key(t)).or_insert(0) += 1;
    }
    let n = trees.len() as f64;
    100.0 * freq.values().map(|&k| (k as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// SynPG receives the reference's full parse.
    Parse,
    /// The reference's template goes through the parse generator first.
    Template,
    /// The source sentence is echoed unchanged.
    CopyInput,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Parse => "parse",
            EvalMode::Template => "template",
            EvalMode::CopyInput => "copy-input",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairStatus {
    Evaluated,
    /// The hypothesis has no parse under the grammar.
    ParseFailed,
    /// The pipeline produced no hypothesis.
    Filtered,
}

impl PairStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PairStatus::Evaluated => "evaluated",
            PairStatus::ParseFailed => "parse-failed",
            PairStatus::Filtered => "filtered",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub source: Vec<String>,
    pub reference: Vec<String>,
    /// Empty when filtered.
    pub hypothesis: Vec<String>,
    pub status: PairStatus,
    /// Rejection reason for filtered pairs.
    pub detail: String,
    pub template_match: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// Fraction in [0, 1].
    pub bleu: f64,
    /// Percentage in [0, 100].
    pub tma: f64,
    pub evaluated: usize,
    pub parse_failed: usize,
    pub filtered: usize,
    pub records: Vec<PairRecord>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.records.len()
    }

    /// Key-value summary in JSON syntax.
    pub fn to_text(&self) -> String {
        format!(
            "{{\n  \"mode\": \"{}\",\n  \"pairs\": {},\n  \"evaluated\": {},\n  \"parse_failed\": {},\n  \"filtered\": {},\n  \"bleu\": {:.6},\n  \"bleu_x100\": {:.2},\n  \"tma\": {:.2}\n}}\n",
            self.mode.as_str(),
            self.total(),
            self.evaluated,
            self.parse_failed,
            self.filtered,
            self.bleu,
            100.0 * self.bleu,
            self.tma
        )
    }

    /// One line per pair with a header.
    pub fn records_tsv(&self) -> String {
        let mut s = String::from("index\tstatus\tmatch\tsource\thypothesis\treference\tdetail\n");
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.status.as_str(),
                u8::from(r.template_match),
                r.source.join(" "),
                r.hypothesis.join(" "),
                r.reference.join(" "),
                r.detail
            );
        }
        s
    }
}

/// Models and settings for [`evaluate_pairs`].
#[derive(Clone, Copy, Debug)]
pub struct EvalSetup<'a> {
    pub synpg: Option<&'a SynPGModel>,
    pub parsegen: Option<&'a ParseGeneratorModel>,
    pub grammar: &'a Grammar,
    pub mode: EvalMode,
    /// Filters applied in template mode.
    pub thresholds: FilterThresholds,
}

fn lowercase_words(t: &ParseTree) -> Vec<String> {
    t.words().into_iter().map(str::to_lowercase).collect()
}

/// Treats `x1` as source and `x2` as target: the model sees `x1`'s words and
/// only `x2`'s parse (parse mode) or template (template mode). Hypotheses are
/// parsed under the grammar for template matching; BLEU is against `x2`'s
/// words. Filtered pairs score an empty hypothesis and no match.
pub fn evaluate_pairs(setup: &EvalSetup<'_>, pairs: &[(ParseTree, ParseTree)]) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    if setup.mode != EvalMode::CopyInput && setup.synpg.is_none() {
        return Err(EvalError::MissingModel(setup.mode.as_str()));
    }
    if setup.mode == EvalMode::Template && setup.parsegen.is_none() {
        return Err(EvalError::MissingParseGenerator);
    }
    let mut records = Vec::with_capacity(pairs.len());
    let mut hyp_trees = Vec::with_capacity(pairs.len());
    for (x1, x2) in pairs {
        let source = lowercase_words(x1);
        let reference = lowercase_words(x2);
        let generated: Result<Vec<String>, String> = match setup.mode {
            EvalMode::CopyInput => Ok(source.clone()),
            EvalMode::Parse => {
                let m = setup.synpg.expect("checked");
                let seq = encode(&source, &m.vocab, TokenClass::Word);
                paraphrase(m, &seq, &linearize(x2), Strategy::Greedy)
                    .map(|y| m.decode_words(&y))
                    .map_err(|e| e.to_string())
            }
            EvalMode::Template => {
                let m = setup.synpg.expect("checked");
                let pg = setup.parsegen.expect("checked");
                let seq = encode(&source, &m.vocab, TokenClass::Word);
                paraphrase_from_template(m, pg, &seq, x1, &extract_template(x2), &setup.thresholds)
                    .map(|y| m.decode_words(&y.paraphrase))
                    .map_err(|r| r.to_string())
            }
        };
        let (hypothesis, tree, status, detail) = match generated {
            Ok(h) => match cky_parse(setup.grammar, &h) {
                Some(t) => (h, Some(t), PairStatus::Evaluated, String::new()),
                None => (h, None, PairStatus::ParseFailed, String::new()),
            },
            Err(reason) => (Vec::new(), None, PairStatus::Filtered, reason),
        };
        let template_match = tree.as_ref().is_some_and(|t| template_key(t) == template_key(x2));
        hyp_trees.push(tree);
        records.push(PairRecord {
            source,
            reference,
            hypothesis,
            status,
            detail,
            template_match,
        });
    }
    let refs: Vec<ParseTree> = pairs.iter().map(|(_, x2)| x2.clone()).collect();
    let hyps: Vec<Vec<String>> = records.iter().map(|r| r.hypothesis.clone()).collect();
    let ref_words: Vec<Vec<String>> = records.iter().map(|r| r.reference.clone()).collect();
    let count = |s: PairStatus| records.iter().filter(|r| r.status == s).count();
    Ok(EvalReport {
        mode: setup.mode,
        bleu: bleu_corpus(&hyps, &ref_words)?,
        tma: template_matching_accuracy(&hyp_trees, &refs)?,
        evaluated: count(PairStatus::Evaluated),
        parse_failed: count(PairStatus::ParseFailed),
        filtered: count(PairStatus::Filtered),
        records,
    })
}
