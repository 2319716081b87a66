use std::collections::HashMap;

use rand::Rng;

use super::{extract_template, tag_sequence, Grammar, ParseTree, SamplingError};

/// Resampling attempts before [`pcfg_sample`] gives up on depth overflow.
pub const SAMPLE_RETRIES: usize = 100;

/// Draws a sentence and its tree by top-down rule sampling. Trees deeper
/// than `max_depth` levels (preterminals included) are discarded and redrawn.
pub fn pcfg_sample<R: Rng + ?Sized>(
    grammar: &Grammar,
    rng: &mut R,
    max_depth: usize,
) -> Result<(Vec<String>, ParseTree), SamplingError> {
    if max_depth == 0 {
        return Err(SamplingError::InvalidDepth);
    }
    for _ in 0..SAMPLE_RETRIES {
        if let Some(tree) = expand(grammar, grammar.start, rng, 1, max_depth) {
            let words = tree.words().into_iter().map(str::to_string).collect();
            return Ok((words, tree));
        }
    }
    Err(SamplingError::RetriesExhausted(SAMPLE_RETRIES))
}

fn pick<R: Rng + ?Sized, T>(rng: &mut R, items: &[T], prob: impl Fn(&T) -> f64) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, it) in items.iter().enumerate() {
        acc += prob(it);
        if u < acc {
            return i;
        }
    }
    items.len() - 1
}

fn expand<R: Rng + ?Sized>(
    g: &Grammar,
    sym: usize,
    rng: &mut R,
    depth: usize,
    max_depth: usize,
) -> Option<ParseTree> {
    if depth > max_depth {
        return None;
    }
    if g.is_preterminal(sym) {
        let words = &g.lexical[sym];
        let (w, _) = &words[pick(rng, words, |(_, p)| *p)];
        return Some(ParseTree::preterminal(g.symbol(sym), w.clone()));
    }
    let options = &g.rules_by_lhs[sym];
    let ri = options[pick(rng, options, |&ri| g.rules[ri].prob)];
    let children = g.rules[ri]
        .rhs
        .iter()
        .map(|&c| expand(g, c, rng, depth + 1, max_depth))
        .collect::<Option<Vec<_>>>()?;
    Some(ParseTree::node(g.symbol(sym), children))
}

/// Builds a syntactic variant of `source`: a fresh grammar sample whose
/// template differs from the source's, with the source's words transplanted
/// into every preterminal slot whose tag the source also has.
///
/// Among up to `attempts` candidates, the first whose tag multiset equals the
/// source's is used (the variant then has exactly the source's words);
/// otherwise the candidate sharing the most tags.
pub fn resample_variant<R: Rng + ?Sized>(
    grammar: &Grammar,
    source: &ParseTree,
    rng: &mut R,
    max_depth: usize,
    attempts: usize,
) -> Result<ParseTree, SamplingError> {
    let source_template = extract_template(source);
    let source_seq = tag_sequence(source);
    let source_tags = tag_counts(&source_seq.0);
    let mut best: Option<(usize, ParseTree)> = None;
    for _ in 0..attempts {
        let (_, cand) = pcfg_sample(grammar, rng, max_depth)?;
        if extract_template(&cand) == source_template {
            continue;
        }
        let cand_seq = tag_sequence(&cand);
        let cand_tags = tag_counts(&cand_seq.0);
        if cand_tags == source_tags {
            best = Some((usize::MAX, cand));
            break;
        }
        let shared = cand_tags
            .iter()
            .map(|(t, &n)| n.min(source_tags.get(t).copied().unwrap_or(0)))
            .sum();
        if best.as_ref().is_none_or(|(s, _)| shared > *s) {
            best = Some((shared, cand));
        }
    }
    let (_, cand) = best.ok_or(SamplingError::NoVariant)?;
    Ok(transplant_words(source, &cand))
}

/// Candidates drawn per pair by [`sample_pairs`].
pub const VARIANT_ATTEMPTS: usize = 400;

/// Draws `n` (source, variant) pairs: a fresh sample and a
/// [`resample_variant`] of it with a different template.
pub fn sample_pairs<R: Rng + ?Sized>(
    grammar: &Grammar,
    n: usize,
    rng: &mut R,
    max_depth: usize,
) -> Result<Vec<(ParseTree, ParseTree)>, SamplingError> {
    (0..n)
        .map(|_| {
            let (_, x1) = pcfg_sample(grammar, rng, max_depth)?;
            let x2 = resample_variant(grammar, &x1, rng, max_depth, VARIANT_ATTEMPTS)?;
            Ok((x1, x2))
        })
        .collect()
}

fn tag_counts(tags: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tags {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn transplant_words(source: &ParseTree, target: &ParseTree) -> ParseTree {
    let mut pool: HashMap<&str, Vec<&str>> = HashMap::new();
    for (tag, word) in source.leaf_labels().into_iter().zip(source.words()) {
        pool.entry(tag).or_default().push(word);
    }
    pool.values_mut().for_each(|v| v.reverse());
    let words: Vec<String> = target
        .leaf_labels()
        .into_iter()
        .zip(target.words())
        .map(|(tag, own)| {
            pool.get_mut(tag)
                .and_then(Vec::pop)
                .unwrap_or(own)
                .to_string()
        })
        .collect();
    target.with_words(&words).expect("same leaf count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn deterministic_grammar_always_same() {
        let g: Grammar = "S -> NP VP # 1\nNP -> \"he\" # 1\nVP -> \"runs\" # 1\n"
            .parse()
            .unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        for _ in 0..20 {
            let (w, t) = pcfg_sample(&g, &mut rng, 5).unwrap();
            assert_eq!(w, ["he", "runs"]);
            assert_eq!(t.to_string(), "(S (NP he) (VP runs))");
        }
    }

    #[test]
    fn depth_limit_exhausts_retries() {
        let g: Grammar = "S -> A # 1\nA -> B # 1\nB -> \"b\" # 1\n".parse().unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let (_, t) = pcfg_sample(&g, &mut rng, 3).unwrap();
        assert_eq!(t.depth(), 3);
        assert_eq!(
            pcfg_sample(&g, &mut rng, 2).unwrap_err(),
            SamplingError::RetriesExhausted(SAMPLE_RETRIES)
        );
        assert_eq!(
            pcfg_sample(&g, &mut rng, 0).unwrap_err(),
            SamplingError::InvalidDepth
        );
    }

    #[test]
    fn variant_reuses_source_words() {
        let g: Grammar = "S -> A B # 0.5\nS -> B A # 0.5\nA -> \"a1\" # 0.5\nA -> \"a2\" # 0.5\nB -> \"b1\" # 0.5\nB -> \"b2\" # 0.5\n"
            .parse()
            .unwrap();
        let src = ParseTree::node(
            "S",
            vec![ParseTree::preterminal("A", "a2"), ParseTree::preterminal("B", "b1")],
        );
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let v = resample_variant(&g, &src, &mut rng, 5, 50).unwrap();
        assert_eq!(v.to_string(), "(S (B b1) (A a2))");
    }

    #[test]
    fn pairs_differ_in_template() {
        let g = crate::parsekit::toy_grammar();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let pairs = sample_pairs(&g, 40, &mut rng, 12).unwrap();
        assert_eq!(pairs.len(), 40);
        // only sources with a movable constituent have a same-tag variant
        let (mut movable, mut shared) = (0, 0);
        for (a, b) in &pairs {
            assert_ne!(extract_template(a), extract_template(b));
            let mut wa = a.words();
            let mut wb = b.words();
            wa.sort_unstable();
            wb.sort_unstable();
            if a.children.len() > 3 {
                movable += 1;
                shared += usize::from(wa == wb);
            } else {
                assert_ne!(wa, wb);
            }
        }
        assert!(movable >= 20);
        assert!(shared + 2 >= movable, "{shared} of {movable} movable sources kept their words");
    }

    #[test]
    fn single_template_grammar_has_no_variant() {
        let g: Grammar = "S -> A # 1\nA -> \"a\" # 1\n".parse().unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let (_, src) = pcfg_sample(&g, &mut rng, 5).unwrap();
        assert_eq!(
            resample_variant(&g, &src, &mut rng, 5, 10).unwrap_err(),
            SamplingError::NoVariant
        );
    }
}
