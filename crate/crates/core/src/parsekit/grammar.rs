use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use super::linear::valid_label;
use super::GrammarError;

const PROB_TOLERANCE: f64 = 1e-9;

/// A phrase-level production `lhs -> rhs[0] rhs[1] ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub lhs: usize,
    pub rhs: Vec<usize>,
    pub prob: f64,
}

/// A closed probabilistic context-free grammar.
///
/// Text format, one rule per line:
///
/// ```text
/// # comment
/// S -> NP VP . # 0.7
/// NN -> "apple" # 0.5
/// ```
///
/// The first rule's left-hand side is the start symbol. Symbols with quoted
/// right-hand sides are preterminals; a symbol may not be both.
#[derive(Clone, Debug)]
pub struct Grammar {
    pub(crate) symbols: Vec<String>,
    index: HashMap<String, usize>,
    pub(crate) start: usize,
    pub(crate) rules: Vec<Rule>,
    pub(crate) rules_by_lhs: Vec<Vec<usize>>,
    /// `(word, prob)` options per preterminal symbol.
    pub(crate) lexical: Vec<Vec<(String, f64)>>,
    pub(crate) word_tags: HashMap<String, Vec<(usize, f64)>>,
    pub(crate) binarized: super::cky::Binarized,
}

impl Grammar {
    pub fn start(&self) -> &str {
        &self.symbols[self.start]
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn symbol_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn is_preterminal(&self, id: usize) -> bool {
        !self.lexical[id].is_empty()
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = &str> {
        (0..self.symbols.len())
            .filter(|&i| !self.rules_by_lhs[i].is_empty())
            .map(|i| self.symbols[i].as_str())
    }

    pub fn preterminals(&self) -> impl Iterator<Item = &str> {
        (0..self.symbols.len())
            .filter(|&i| self.is_preterminal(i))
            .map(|i| self.symbols[i].as_str())
    }

    /// All distinct words, sorted.
    pub fn lexicon(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.word_tags.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }

    pub fn tags_of(&self, word: &str) -> &[(usize, f64)] {
        self.word_tags.get(word).map_or(&[], Vec::as_slice)
    }

    /// Renders the grammar back into its text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let rhs: Vec<&str> = r.rhs.iter().map(|&s| self.symbols[s].as_str()).collect();
            let _ = writeln!(out, "{} -> {} # {}", self.symbols[r.lhs], rhs.join(" "), r.prob);
        }
        for (sym, words) in self.lexical.iter().enumerate() {
            for (w, p) in words {
                let _ = writeln!(out, "{} -> \"{w}\" # {p}", self.symbols[sym]);
            }
        }
        out
    }
}

enum Rhs {
    Symbols(Vec<String>),
    Word(String),
}

fn parse_line(line: &str, lineno: usize) -> Result<(String, Rhs, f64), GrammarError> {
    let err = |m: &str| GrammarError {
        line: lineno,
        message: m.to_string(),
    };
    let (lhs, rest) = line.split_once("->").ok_or_else(|| err("missing '->'"))?;
    let lhs = lhs.trim();
    if !valid_label(lhs) {
        return Err(err("invalid left-hand side"));
    }
    let toks: Vec<&str> = rest.split_whitespace().collect();
    let hash = toks
        .iter()
        .position(|&t| t == "#")
        .ok_or_else(|| err("missing '# probability'"))?;
    let (rhs, tail) = toks.split_at(hash);
    let prob: f64 = match tail {
        [_, p] => p.parse().map_err(|_| err(&format!("bad probability '{p}'")))?,
        _ => return Err(err("expected exactly one probability after '#'")),
    };
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(err("probability must be in (0, 1]"));
    }
    if rhs.is_empty() {
        return Err(err("empty right-hand side"));
    }
    let first = rhs[0];
    if first.starts_with('"') {
        if rhs.len() != 1 || first.len() < 3 || !first.ends_with('"') {
            return Err(err("lexical rule needs exactly one quoted word"));
        }
        let word = &first[1..first.len() - 1];
        if word.chars().any(|c| c == '(' || c == ')' || c == '"') {
            return Err(err("word contains a reserved character"));
        }
        return Ok((lhs.to_string(), Rhs::Word(word.to_string()), prob));
    }
    if let Some(bad) = rhs.iter().find(|s| !valid_label(s) || s.starts_with('"')) {
        return Err(err(&format!("invalid symbol '{bad}'")));
    }
    Ok((
        lhs.to_string(),
        Rhs::Symbols(rhs.iter().map(|s| s.to_string()).collect()),
        prob,
    ))
}

impl FromStr for Grammar {
    type Err = GrammarError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut symbols: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |s: &str| -> usize {
            *index.entry(s.to_string()).or_insert_with(|| {
                symbols.push(s.to_string());
                symbols.len() - 1
            })
        };
        let mut rules = Vec::new();
        let mut lex: Vec<(usize, String, f64)> = Vec::new();
        let mut first_line: HashMap<usize, usize> = HashMap::new();
        // phrase=false / lexical=true, first line where the kind was fixed
        let mut kind: HashMap<usize, (bool, usize)> = HashMap::new();

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lhs, rhs, prob) = parse_line(line, lineno)?;
            let l = intern(&lhs);
            first_line.entry(l).or_insert(lineno);
            let is_lex = matches!(rhs, Rhs::Word(_));
            match kind.get(&l) {
                Some(&(k, at)) if k != is_lex => {
                    return Err(GrammarError {
                        line: lineno,
                        message: format!(
                            "'{lhs}' has both phrase and lexical rules (first seen on line {at})"
                        ),
                    })
                }
                Some(_) => {}
                None => {
                    kind.insert(l, (is_lex, lineno));
                }
            }
            match rhs {
                Rhs::Word(w) => lex.push((l, w, prob)),
                Rhs::Symbols(ss) => {
                    let rhs: Vec<usize> = ss.iter().map(|s| intern(s)).collect();
                    for &id in &rhs {
                        first_line.entry(id).or_insert(lineno);
                    }
                    rules.push(Rule { lhs: l, rhs, prob });
                }
            }
        }
        if rules.is_empty() && lex.is_empty() {
            return Err(GrammarError {
                line: 0,
                message: "grammar has no rules".into(),
            });
        }
        let n = symbols.len();
        let start = rules.first().map_or_else(|| lex[0].0, |r| r.lhs);
        let mut rules_by_lhs = vec![Vec::new(); n];
        for (ri, r) in rules.iter().enumerate() {
            rules_by_lhs[r.lhs].push(ri);
        }
        let mut lexical = vec![Vec::new(); n];
        let mut word_tags: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for (l, w, p) in lex {
            word_tags.entry(w.clone()).or_default().push((l, p));
            lexical[l].push((w, p));
        }

        // probability mass per left-hand side
        let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
        for r in &rules {
            *mass.entry(r.lhs).or_default() += r.prob;
        }
        for (l, ws) in lexical.iter().enumerate() {
            for (_, p) in ws {
                *mass.entry(l).or_default() += p;
            }
        }
        for (&l, &m) in &mass {
            if (m - 1.0).abs() > PROB_TOLERANCE {
                return Err(GrammarError {
                    line: first_line[&l],
                    message: format!("probabilities for '{}' sum to {m}, not 1", symbols[l]),
                });
            }
        }
        for s in 0..n {
            if rules_by_lhs[s].is_empty() && lexical[s].is_empty() {
                return Err(GrammarError {
                    line: first_line[&s],
                    message: format!("symbol '{}' has no rules", symbols[s]),
                });
            }
        }

        // productivity fixpoint
        let mut productive: Vec<bool> = lexical.iter().map(|w| !w.is_empty()).collect();
        loop {
            let mut changed = false;
            for r in &rules {
                if !productive[r.lhs] && r.rhs.iter().all(|&s| productive[s]) {
                    productive[r.lhs] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if let Some(s) = (0..n).find(|&s| !productive[s]) {
            return Err(GrammarError {
                line: first_line[&s],
                message: format!("symbol '{}' derives no finite string", symbols[s]),
            });
        }
        let mut reachable = vec![false; n];
        let mut stack = vec![start];
        reachable[start] = true;
        while let Some(s) = stack.pop() {
            for &ri in &rules_by_lhs[s] {
                for &c in &rules[ri].rhs {
                    if !reachable[c] {
                        reachable[c] = true;
                        stack.push(c);
                    }
                }
            }
        }
        if let Some(s) = (0..n).find(|&s| !reachable[s]) {
            return Err(GrammarError {
                line: first_line[&s],
                message: format!("symbol '{}' is unreachable from '{}'", symbols[s], symbols[start]),
            });
        }

        let binarized = super::cky::Binarized::build(n, &rules);
        Ok(Grammar {
            symbols,
            index,
            start,
            rules,
            rules_by_lhs,
            lexical,
            word_tags,
            binarized,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
# deterministic
S -> NP VP # 1.0
NP -> "he" # 1
VP -> "runs" # 1.0
"#;

    #[test]
    fn parses_tiny_grammar() {
        let g: Grammar = TINY.parse().unwrap();
        assert_eq!(g.start(), "S");
        assert_eq!(g.rules().len(), 1);
        assert_eq!(g.lexicon(), vec!["he", "runs"]);
        assert!(g.is_preterminal(g.symbol_id("NP").unwrap()));
        let again: Grammar = g.to_text().parse().unwrap();
        assert_eq!(again.to_text(), g.to_text());
    }

    #[test]
    fn reports_line_numbers() {
        let e = "S -> A B # 0.5\nA -> \"a\" # 1\nB -> \"b\" # 1\n"
            .parse::<Grammar>()
            .unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("sum"));

        let e = "S -> A # 1\nA -> \"a\" 1\n".parse::<Grammar>().unwrap_err();
        assert_eq!(e.line, 2);

        let e = "S -> A # 1\nA -> \"a\" # 1\nA -> B # 0\n"
            .parse::<Grammar>()
            .unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn rejects_unproductive_and_unreachable() {
        let e = "S -> A # 1\nA -> A # 1\n".parse::<Grammar>().unwrap_err();
        assert!(e.message.contains("finite"), "{e}");
        let e = "S -> A # 1\nA -> \"a\" # 1\nZ -> \"z\" # 1\n"
            .parse::<Grammar>()
            .unwrap_err();
        assert!(e.message.contains("unreachable"));
        assert_eq!(e.line, 3);
        let e = "S -> A # 1\n".parse::<Grammar>().unwrap_err();
        assert!(e.message.contains("no rules"));
    }

    #[test]
    fn rejects_mixed_symbol_kinds() {
        let e = "S -> A # 1\nA -> \"a\" # 0.5\nA -> S # 0.5\n"
            .parse::<Grammar>()
            .unwrap_err();
        assert_eq!(e.line, 3);
    }
}
