//! Word-level vocabularies and text↔id encoding.
//!
//! Three token classes share one layout: ids 0..4 are PAD, BOS, EOS and UNK,
//! followed by the class's tokens by descending frequency (ties broken
//! lexicographically).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::parsekit::{linearize, tag_sequence, ParseTree, MAX_PARSE_LEN};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

pub const MAX_WORD_LEN: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("expected a {expected:?} sequence, got {got:?}")]
    WrongClass { expected: TokenClass, got: TokenClass },
    #[error("malformed vocabulary table: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenClass {
    Word,
    Parse,
    Tag,
}

impl TokenClass {
    pub fn max_len(self) -> usize {
        match self {
            TokenClass::Word | TokenClass::Tag => MAX_WORD_LEN,
            TokenClass::Parse => MAX_PARSE_LEN,
        }
    }
}

/// Id↔string table for one token class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenTable {
    /// A table holding only the reserved tokens.
    pub fn reserved_only() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect())
            .expect("reserved tokens are valid")
    }

    /// Rebuilds a table from its full token list (reserved tokens first).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(VocabError::Malformed("reserved ids missing".into()));
        }
        let index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != tokens.len() {
            return Err(VocabError::Malformed("duplicate token".into()));
        }
        Ok(Self { tokens, index })
    }

    fn build<'a>(
        streams: impl IntoIterator<Item = impl IntoIterator<Item = &'a str>>,
        min_count: usize,
        max_size: usize,
    ) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in streams {
            for t in s {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count && !RESERVED.contains(&t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let room = max_size.saturating_sub(RESERVED.len());
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().take(room).map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens).expect("distinct tokens")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `id<TAB>token` lines.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{t}");
        }
        s
    }
}

/// Vocabularies for words, parse tokens and POS tags.
#[derive(Debug)]
pub struct Vocab {
    pub words: TokenTable,
    pub parse: TokenTable,
    pub tags: TokenTable,
    truncations: AtomicU64,
}

impl Clone for Vocab {
    fn clone(&self) -> Self {
        Self {
            words: self.words.clone(),
            parse: self.parse.clone(),
            tags: self.tags.clone(),
            truncations: AtomicU64::new(self.truncations()),
        }
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && self.parse == other.parse && self.tags == other.tags
    }
}

impl Vocab {
    pub fn new(words: TokenTable, parse: TokenTable, tags: TokenTable) -> Self {
        Self {
            words,
            parse,
            tags,
            truncations: AtomicU64::new(0),
        }
    }

    pub fn table(&self, class: TokenClass) -> &TokenTable {
        match class {
            TokenClass::Word => &self.words,
            TokenClass::Parse => &self.parse,
            TokenClass::Tag => &self.tags,
        }
    }

    /// How many sequences [`encode`] has truncated so far.
    pub fn truncations(&self) -> u64 {
        self.truncations.load(Ordering::Relaxed)
    }
}

/// Builds the word table from whitespace-tokenized, lowercased text lines.
/// The parse and tag tables hold only the reserved tokens.
pub fn build_vocab<S: AsRef<str>>(
    lines: &[S],
    min_count: usize,
    max_size: usize,
) -> Result<Vocab, VocabError> {
    if lines.iter().all(|l| l.as_ref().trim().is_empty()) {
        return Err(VocabError::EmptyCorpus);
    }
    let lowered: Vec<String> = lines.iter().map(|l| l.as_ref().to_lowercase()).collect();
    let words = TokenTable::build(
        lowered.iter().map(|l| l.split_whitespace()),
        min_count,
        max_size,
    );
    Ok(Vocab::new(
        words,
        TokenTable::reserved_only(),
        TokenTable::reserved_only(),
    ))
}

/// Builds all three tables from parsed sentences.
pub fn build_vocab_from_trees(
    trees: &[ParseTree],
    min_count: usize,
    max_size: usize,
) -> Result<Vocab, VocabError> {
    if trees.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let words: Vec<Vec<String>> = trees
        .iter()
        .map(|t| t.words().iter().map(|w| w.to_lowercase()).collect())
        .collect();
    let parses: Vec<Vec<String>> = trees.iter().map(|t| linearize(t).into_tokens()).collect();
    let tags: Vec<Vec<String>> = trees.iter().map(|t| tag_sequence(t).0).collect();
    let table = |streams: &[Vec<String>], min: usize, max: usize| {
        TokenTable::build(streams.iter().map(|s| s.iter().map(String::as_str)), min, max)
    };
    Ok(Vocab::new(
        table(&words, min_count, max_size),
        // structural tokens are never dropped
        table(&parses, 1, usize::MAX),
        table(&tags, 1, usize::MAX),
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub class: TokenClass,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Order-free multiset of ids, held in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BagOfTokens {
    ids: Vec<usize>,
    pub class: TokenClass,
}

impl BagOfTokens {
    pub fn new(mut ids: Vec<usize>, class: TokenClass) -> Self {
        ids.sort_unstable();
        Self { ids, class }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Maps tokens to ids; unknown tokens become UNK and over-long input is cut
/// to the class limit (counted in [`Vocab::truncations`]). Word tokens are
/// lowercased. BOS/EOS are not added here.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocab, class: TokenClass) -> TokenSequence {
    let table = vocab.table(class);
    let limit = class.max_len();
    if tokens.len() > limit {
        vocab.truncations.fetch_add(1, Ordering::Relaxed);
    }
    let ids = tokens
        .iter()
        .take(limit)
        .map(|t| {
            let t = t.as_ref();
            let id = match class {
                TokenClass::Word => table.id(&t.to_lowercase()),
                _ => table.id(t),
            };
            id.unwrap_or(UNK)
        })
        .collect();
    TokenSequence { ids, class }
}

pub fn decode(seq: &TokenSequence, vocab: &Vocab) -> Vec<String> {
    let table = vocab.table(seq.class);
    seq.ids
        .iter()
        .map(|&i| table.token(i).unwrap_or(RESERVED[UNK]).to_string())
        .collect()
}

/// Drops word order. Parse sequences are rejected: their order is the signal.
pub fn to_bag(seq: &TokenSequence) -> Result<BagOfTokens, VocabError> {
    if seq.class == TokenClass::Parse {
        return Err(VocabError::WrongClass {
            expected: TokenClass::Word,
            got: seq.class,
        });
    }
    Ok(BagOfTokens::new(seq.ids.clone(), seq.class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builds_frequency_sorted_words() {
        let v = build_vocab(&["a a b"], 1, 100).unwrap();
        assert_eq!(v.words.tokens()[4..], ["a", "b"]);
        assert_eq!(v.words.id("<pad>"), Some(PAD));
        let v = build_vocab(&["a a b"], 2, 100).unwrap();
        assert_eq!(v.words.tokens()[4..], ["a"]);
        let v = build_vocab(&["c b a a"], 1, 6).unwrap();
        assert_eq!(v.words.tokens()[4..], ["a", "b"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(build_vocab::<&str>(&[], 1, 10).unwrap_err(), VocabError::EmptyCorpus);
        assert_eq!(build_vocab(&["  "], 1, 10).unwrap_err(), VocabError::EmptyCorpus);
        assert!(build_vocab_from_trees(&[], 1, 10).is_err());
    }

    #[test]
    fn permuted_corpus_gives_same_vocab() {
        let lines = ["the cat sat", "a dog ran", "the dog sat", "zeta alpha"];
        let rev: Vec<&str> = lines.iter().rev().copied().collect();
        assert_eq!(build_vocab(&lines, 1, 50).unwrap(), build_vocab(&rev, 1, 50).unwrap());
    }

    #[test]
    fn encode_maps_unknown_and_lowercases() {
        let v = build_vocab(&["he eats"], 1, 10).unwrap();
        let s = encode(&["He", "eats", "pears"], &v, TokenClass::Word);
        assert_eq!(s.ids, vec![v.words.id("he").unwrap(), v.words.id("eats").unwrap(), UNK]);
        assert_eq!(decode(&s, &v), ["he", "eats", "<unk>"]);
    }

    #[test]
    fn encode_truncates_and_counts() {
        let v = build_vocab(&["x"], 1, 10).unwrap();
        let long = vec!["x"; MAX_WORD_LEN + 5];
        let s = encode(&long, &v, TokenClass::Word);
        assert_eq!(s.len(), MAX_WORD_LEN);
        assert_eq!(v.truncations(), 1);
    }

    #[test]
    fn bag_sorts_and_rejects_parse_class() {
        let s = TokenSequence { ids: vec![5, 3, 5], class: TokenClass::Word };
        assert_eq!(to_bag(&s).unwrap().ids(), &[3, 5, 5]);
        let p = TokenSequence { ids: vec![5], class: TokenClass::Parse };
        assert!(to_bag(&p).is_err());
    }

    #[test]
    fn table_from_tokens_validates() {
        assert!(TokenTable::from_tokens(vec!["a".into()]).is_err());
        let mut t: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        t.push("x".into());
        t.push("x".into());
        assert!(TokenTable::from_tokens(t).is_err());
    }

    proptest! {
        #[test]
        fn bag_is_permutation_invariant_multiset(
            ids in proptest::collection::vec(0usize..20, 0..15),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed));
            let a = to_bag(&TokenSequence { ids: ids.clone(), class: TokenClass::Word }).unwrap();
            let b = to_bag(&TokenSequence { ids: shuffled, class: TokenClass::Word }).unwrap();
            prop_assert_eq!(&a, &b);
            let mut counts = HashMap::new();
            for i in &ids { *counts.entry(*i).or_insert(0i32) += 1; }
            for i in a.ids() { *counts.get_mut(i).unwrap() -= 1; }
            prop_assert!(counts.values().all(|&c| c == 0));
        }
    }
}
