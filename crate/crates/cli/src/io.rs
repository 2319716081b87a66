use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use synpg::parsegen::ParseGeneratorModel;
use synpg::parsekit::{parse_ptb_line, toy_grammar, toy_grammar_text, Grammar, ParseTree};
use synpg::synpg::{load_checkpoint, write_atomic, SynPGModel};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// Non-blank lines with their 1-based line numbers.
pub fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

pub fn parse_tree(line: usize, text: &str, what: &str) -> Result<ParseTree> {
    parse_ptb_line(text).map_err(|e| anyhow!("{what} line {line}: {e}"))
}

/// One bracketed tree per line.
pub fn read_trees(path: &Path) -> Result<Vec<ParseTree>> {
    let text = read_text(path)?;
    lines(&text).map(|(i, l)| parse_tree(i, l, "corpus")).collect()
}

/// `x1<TAB>x2` bracketed trees per line.
pub fn read_pairs(path: &Path) -> Result<Vec<(ParseTree, ParseTree)>> {
    let text = read_text(path)?;
    lines(&text)
        .map(|(i, l)| {
            let (a, b) = l
                .split_once('\t')
                .ok_or_else(|| anyhow!("pairs line {i}: expected two tab-separated trees"))?;
            Ok((parse_tree(i, a, "pairs")?, parse_tree(i, b, "pairs")?))
        })
        .collect()
}

/// The grammar at `path`, or the bundled toy grammar.
pub fn load_grammar(path: Option<&Path>) -> Result<Grammar> {
    match path {
        None => Ok(toy_grammar()),
        Some(p) => {
            let text = read_text(p)?;
            text.parse().with_context(|| format!("grammar {}", p.display()))
        }
    }
}

pub fn bundled_grammar_text() -> &'static str {
    toy_grammar_text()
}

pub fn load_synpg(path: &Path) -> Result<SynPGModel> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    ckpt.into_synpg().with_context(|| format!("loading {}", path.display()))
}

pub fn load_parsegen(path: &Path) -> Result<ParseGeneratorModel> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    ParseGeneratorModel::try_from(ckpt).with_context(|| format!("loading {}", path.display()))
}

pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing required flag --{flag}"),
    }
}
