use std::io::Read as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::ValueEnum;
use synpg::parsekit::{cky_parse, extract_template, linearize, tag_sequence};

use crate::io::{bundled_grammar_text, lines, load_grammar, parse_tree, read_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tool {
    /// Bracketed tree -> linearized parse.
    Linearize,
    /// Bracketed tree -> template.
    Template,
    /// Bracketed tree -> part-of-speech tags.
    Tags,
    /// Sentence -> bracketed tree, or `NONE`.
    Cky,
    /// Print the bundled toy grammar.
    Grammar,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(value_enum)]
    pub tool: Tool,
    /// Input lines; stdin when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    if args.tool == Tool::Grammar {
        print!("{}", bundled_grammar_text());
        return Ok(());
    }
    let text = match &args.input {
        Some(p) => read_text(p)?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            s
        }
    };
    let grammar = match args.tool {
        Tool::Cky => Some(load_grammar(args.grammar.as_deref())?),
        _ => None,
    };
    let mut out = String::new();
    for (i, line) in lines(&text) {
        let rendered = match args.tool {
            Tool::Linearize => linearize(&parse_tree(i, line, "input")?).to_string(),
            Tool::Template => extract_template(&parse_tree(i, line, "input")?).to_string(),
            Tool::Tags => tag_sequence(&parse_tree(i, line, "input")?).tags().join(" "),
            Tool::Cky => {
                let g = grammar.as_ref().ok_or_else(|| anyhow!("no grammar"))?;
                let words: Vec<&str> = line.split_whitespace().collect();
                cky_parse(g, &words).map_or_else(|| "NONE".to_string(), |t| t.to_string())
            }
            Tool::Grammar => unreachable!("handled above"),
        };
        out.push_str(&rendered);
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}
