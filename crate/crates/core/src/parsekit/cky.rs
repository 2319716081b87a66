//! Viterbi CKY over a binarized copy of the grammar with unary closure.

use super::grammar::Rule;
use super::{Grammar, ParseTree};

#[derive(Clone, Debug, Default)]
pub(crate) struct Binarized {
    /// Total symbols: the grammar's own followed by intermediate ones.
    n_symbols: usize,
    n_original: usize,
    binary: Vec<(usize, usize, usize, f64)>,
    unary: Vec<(usize, usize, f64)>,
}

impl Binarized {
    /// `A -> X1 X2 ... Xk` (k > 2) becomes `A -> X1 @1`, `@1 -> X2 @2`, ...,
    /// with the rule's log-probability on the first link.
    pub(crate) fn build(n: usize, rules: &[Rule]) -> Self {
        let mut b = Binarized {
            n_symbols: n,
            n_original: n,
            ..Default::default()
        };
        for r in rules {
            let lp = r.prob.ln();
            match r.rhs.as_slice() {
                [c] => b.unary.push((r.lhs, *c, lp)),
                [l, rr] => b.binary.push((r.lhs, *l, *rr, lp)),
                rhs => {
                    let mut parent = r.lhs;
                    let mut score = lp;
                    for &sym in &rhs[..rhs.len() - 2] {
                        let inter = b.n_symbols;
                        b.n_symbols += 1;
                        b.binary.push((parent, sym, inter, score));
                        parent = inter;
                        score = 0.0;
                    }
                    b.binary
                        .push((parent, rhs[rhs.len() - 2], rhs[rhs.len() - 1], score));
                }
            }
        }
        b
    }

    fn is_intermediate(&self, s: usize) -> bool {
        s >= self.n_original
    }
}

#[derive(Clone, Copy, Debug)]
enum Back {
    Word,
    Unary(usize),
    Binary {
        split: usize,
        left: usize,
        right: usize,
    },
}

type Cell = Vec<Option<(f64, Back)>>;

/// Most probable parse of `sentence`, or `None` when the sentence is outside
/// the grammar's language (including words missing from the lexicon).
pub fn cky_parse<S: AsRef<str>>(grammar: &Grammar, sentence: &[S]) -> Option<ParseTree> {
    let n = sentence.len();
    if n == 0 {
        return None;
    }
    let bin = &grammar.binarized;
    let ns = bin.n_symbols;
    // chart[i][len-1] covers words i..i+len
    let mut chart: Vec<Vec<Cell>> = (0..n).map(|i| vec![vec![None; ns]; n - i]).collect();

    for (i, w) in sentence.iter().enumerate() {
        let tags = grammar.tags_of(w.as_ref());
        if tags.is_empty() {
            return None;
        }
        let cell = &mut chart[i][0];
        for &(t, p) in tags {
            cell[t] = Some((p.ln(), Back::Word));
        }
        unary_closure(cell, &bin.unary);
    }

    for len in 2..=n {
        for i in 0..=n - len {
            let mut cell: Cell = vec![None; ns];
            for split in 1..len {
                for &(parent, l, r, lp) in &bin.binary {
                    let Some((ls, _)) = chart[i][split - 1][l] else { continue };
                    let Some((rs, _)) = chart[i + split][len - split - 1][r] else { continue };
                    let score = ls + rs + lp;
                    if cell[parent].is_none_or(|(best, _)| score > best) {
                        cell[parent] = Some((
                            score,
                            Back::Binary {
                                split,
                                left: l,
                                right: r,
                            },
                        ));
                    }
                }
            }
            unary_closure(&mut cell, &bin.unary);
            chart[i][len - 1] = cell;
        }
    }

    chart[0][n - 1][grammar.start]?;
    let mut built = build(grammar, &chart, sentence, grammar.start, 0, n);
    debug_assert_eq!(built.len(), 1);
    built.pop()
}

fn unary_closure(cell: &mut Cell, unary: &[(usize, usize, f64)]) {
    // log-probs are ≤ 0, so a cycle can never improve a score; the loop is
    // bounded by the number of unary rules.
    for _ in 0..=unary.len() {
        let mut changed = false;
        for &(parent, child, lp) in unary {
            let Some((cs, _)) = cell[child] else { continue };
            let score = cs + lp;
            if cell[parent].is_none_or(|(best, _)| score > best) {
                cell[parent] = Some((score, Back::Unary(child)));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn build<S: AsRef<str>>(
    g: &Grammar,
    chart: &[Vec<Cell>],
    sentence: &[S],
    sym: usize,
    i: usize,
    j: usize,
) -> Vec<ParseTree> {
    let (_, back) = chart[i][j - i - 1][sym].expect("back-pointer target exists");
    let children = match back {
        Back::Word => {
            return vec![ParseTree::preterminal(
                g.symbol(sym),
                sentence[i].as_ref(),
            )]
        }
        Back::Unary(c) => build(g, chart, sentence, c, i, j),
        Back::Binary { split, left, right } => {
            let mut v = build(g, chart, sentence, left, i, i + split);
            v.extend(build(g, chart, sentence, right, i + split, j));
            v
        }
    };
    if g.binarized.is_intermediate(sym) {
        children
    } else {
        vec![ParseTree::node(g.symbol(sym), children)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "S -> NP VP # 1\nNP -> \"he\" # 1\nVP -> \"runs\" # 1\n";

    #[test]
    fn deterministic_grammar_round_trip() {
        let g: Grammar = TINY.parse().unwrap();
        let t = cky_parse(&g, &["he", "runs"]).unwrap();
        assert_eq!(t.to_string(), "(S (NP he) (VP runs))");
        assert!(cky_parse(&g, &["he", "he", "he"]).is_none());
        assert!(cky_parse(&g, &["she", "runs"]).is_none());
        assert!(cky_parse::<&str>(&g, &[]).is_none());
    }

    #[test]
    fn nary_and_unary_rules_debinarize() {
        let g: Grammar = "S -> A B C D # 1\nA -> X # 1\nX -> \"x\" # 1\nB -> \"b\" # 1\nC -> \"c\" # 1\nD -> \"d\" # 1\n"
            .parse()
            .unwrap();
        let t = cky_parse(&g, &["x", "b", "c", "d"]).unwrap();
        assert_eq!(t.to_string(), "(S (A (X x)) (B b) (C c) (D d))");
    }

    #[test]
    fn picks_the_more_probable_parse() {
        // "a a" is S -> A A either via P (0.6) or Q (0.4)
        let g: Grammar = "S -> P # 0.6\nS -> Q # 0.4\nP -> A A # 1\nQ -> A A # 1\nA -> \"a\" # 1\n"
            .parse()
            .unwrap();
        let t = cky_parse(&g, &["a", "a"]).unwrap();
        assert_eq!(t.children[0].label, "P");
    }
}
