use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use synpg::parsekit::{cky_parse, delinearize, parse_ptb_line, LinearizedParse, Template};
use synpg::pipeline::{paraphrase_from_template, run_batch};
use synpg::synpg::paraphrase;
use synpg::tokenizer::{encode, TokenClass};
use synpg::transformer::Strategy;

use crate::io::{load_grammar, load_parsegen, load_synpg, read_text, require, write_text};
use crate::ConfigArg;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    pub synpg: PathBuf,
    /// Parse generator checkpoint; needed unless --target-parse is given.
    #[arg(long)]
    pub parsegen: Option<PathBuf>,
    /// Source sentence, whitespace tokenized.
    #[arg(long)]
    pub sentence: Option<String>,
    /// Bracketed parse of the source; CKY-parsed with --grammar when omitted.
    #[arg(long)]
    pub parse: Option<String>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Target template, e.g. `(S(NP-SBJ)(VP)(.))`.
    #[arg(long)]
    pub template: Option<String>,
    /// Full target parse (bracketed or linearized), bypassing the parse generator.
    #[arg(long)]
    pub target_parse: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub beam: usize,
    /// Batch input of `sentence<TAB>parse<TAB>template` lines.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    /// Batch output of `source<TAB>paraphrase<TAB>status` lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: ConfigArg,
}

fn target_parse(text: &str) -> Result<LinearizedParse> {
    if let Ok(tree) = parse_ptb_line(text) {
        return Ok(synpg::parsekit::linearize(&tree));
    }
    let lin: LinearizedParse = text.parse().map_err(|e| anyhow!("target parse: {e}"))?;
    delinearize(&lin).map_err(|e| anyhow!("target parse: {e}"))?;
    Ok(lin)
}

pub fn run(args: Args) -> Result<()> {
    let cfg = args.common.load()?;
    cfg.echo();
    let thresholds = cfg.filter.thresholds();
    thresholds.validate()?;
    let synpg = load_synpg(&args.synpg)?;
    if let Some(batch) = &args.batch {
        let out = require(&args.out, "out")?;
        let parsegen = load_parsegen(require(&args.parsegen, "parsegen")?)?;
        let result = run_batch(&synpg, &parsegen, &read_text(batch)?, &thresholds)?;
        write_text(out, &result)?;
        let ok = result.lines().filter(|l| l.ends_with("\tok")).count();
        println!("accepted {ok} of {}", result.lines().count());
        return Ok(());
    }
    let sentence = require(&args.sentence, "sentence")?;
    let words: Vec<&str> = sentence.split_whitespace().collect();
    if words.is_empty() {
        bail!("empty --sentence");
    }
    let seq = encode(&words, &synpg.vocab, TokenClass::Word);
    let strategy = if args.beam > 1 { Strategy::Beam(args.beam) } else { Strategy::Greedy };
    if let Some(p) = &args.target_parse {
        let out = paraphrase(&synpg, &seq, &target_parse(p)?, strategy)?;
        println!("{}", synpg.decode_words(&out).join(" "));
        return Ok(());
    }
    let template: Template = require(&args.template, "template")?
        .parse()
        .map_err(|e| anyhow!("template: {e}"))?;
    let source_tree = match &args.parse {
        Some(p) => parse_ptb_line(p).map_err(|e| anyhow!("source parse: {e}"))?,
        None => {
            let grammar = load_grammar(args.grammar.as_deref())?;
            cky_parse(&grammar, &words).ok_or_else(|| anyhow!("sentence has no parse under the grammar"))?
        }
    };
    let parsegen = load_parsegen(require(&args.parsegen, "parsegen")?)?;
    match paraphrase_from_template(&synpg, &parsegen, &seq, &source_tree, &template, &thresholds) {
        Ok(p) => {
            println!("parse: {}", p.parse);
            println!("{}", synpg.decode_words(&p.paraphrase).join(" "));
        }
        Err(r) => println!("rejected: {r}"),
    }
    Ok(())
}
