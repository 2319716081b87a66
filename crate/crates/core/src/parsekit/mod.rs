//! Constituency parse data model: bracket reading, linearization, templates,
//! tag sequences, a PCFG sampler and a CKY parser for closed grammars.

mod cky;
mod grammar;
mod linear;
mod ptb;
mod sample;
mod tree;

pub use cky::cky_parse;
pub use grammar::{Grammar, Rule};
pub use linear::{
    delinearize, delinearize_tokens, extract_template, linearize, tag_sequence, LinearizedParse,
    TagSequence, Template, CLOSE,
};
pub use ptb::parse_ptb_line;
pub use sample::{pcfg_sample, resample_variant, sample_pairs, SAMPLE_RETRIES, VARIANT_ATTEMPTS};
pub use tree::ParseTree;

use thiserror::Error;

/// Default cap on linearized parse length.
pub const MAX_PARSE_LEN: usize = 160;

const TOY_GRAMMAR: &str = include_str!("../../grammars/toy.pcfg");

/// The bundled toy grammar used for synthetic corpora.
pub fn toy_grammar() -> Grammar {
    TOY_GRAMMAR.parse().expect("bundled grammar is valid")
}

pub fn toy_grammar_text() -> &'static str {
    TOY_GRAMMAR
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("bracket syntax error at byte {offset}: {message}")]
pub struct PtbError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("empty parse")]
    Empty,
    #[error("unbalanced brackets at token {position}")]
    Unbalanced { position: usize },
    #[error("invalid parse token '{0}'")]
    BadToken(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("grammar line {line}: {message}")]
pub struct GrammarError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("max_depth must be at least 1")]
    InvalidDepth,
    #[error("no derivation within the depth limit after {0} attempts")]
    RetriesExhausted(usize),
    #[error("grammar produced no sample with a different template")]
    NoVariant,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn toy_grammar_shape() {
        let g = toy_grammar();
        assert_eq!(g.start(), "S");
        let lexicon = g.lexicon();
        assert!((180..=220).contains(&lexicon.len()), "{}", lexicon.len());
        // every word has exactly one tag
        assert!(lexicon.iter().all(|w| g.tags_of(w).len() == 1));
        let templates: BTreeSet<String> = g
            .rules()
            .iter()
            .filter(|r| g.symbol(r.lhs) == "S")
            .map(|r| {
                let kids: Vec<String> = r.rhs.iter().map(|&s| format!("({})", g.symbol(s))).collect();
                format!("(S{})", kids.concat())
            })
            .collect();
        assert!(templates.len() >= 6);
    }
}
