use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use synpg::parsekit::{extract_template, pcfg_sample, sample_pairs, ParseTree};

use crate::io::{load_grammar, write_text};
use crate::ConfigArg;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Grammar file; the bundled toy grammar when omitted.
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Number of sentences.
    #[arg(long)]
    pub n: usize,
    /// Corpus output, one bracketed tree per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of (source, variant) evaluation pairs to sample after the corpus.
    #[arg(long, default_value_t = 0)]
    pub pairs: usize,
    /// Pairs output, `x1<TAB>x2` trees per line.
    #[arg(long)]
    pub pairs_out: Option<PathBuf>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[command(flatten)]
    pub common: ConfigArg,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = args.common.load()?;
    if let Some(d) = args.max_depth {
        cfg.corpus.max_depth = d;
    }
    if args.pairs > 0 && args.pairs_out.is_none() {
        bail!("--pairs needs --pairs-out");
    }
    cfg.echo();
    let grammar = load_grammar(args.grammar.as_deref())?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let trees: Vec<ParseTree> = (0..args.n)
        .map(|_| pcfg_sample(&grammar, &mut rng, cfg.corpus.max_depth).map(|(_, t)| t))
        .collect::<Result<_, _>>()?;
    let mut text = String::new();
    for t in &trees {
        let _ = writeln!(text, "{t}");
    }
    write_text(&args.out, &text)?;
    print!("{}", summary(&trees));
    if let Some(path) = &args.pairs_out {
        let pairs = sample_pairs(&grammar, args.pairs, &mut rng, cfg.corpus.max_depth)?;
        let mut text = String::new();
        for (a, b) in &pairs {
            let _ = writeln!(text, "{a}\t{b}");
        }
        write_text(path, &text)?;
        println!("pairs: {}", pairs.len());
    }
    Ok(())
}

/// Vocabulary size, template inventory and mean length of a corpus.
pub fn summary(trees: &[ParseTree]) -> String {
    let vocab: HashSet<String> = trees
        .iter()
        .flat_map(|t| t.words().into_iter().map(str::to_lowercase))
        .collect();
    let mut templates: BTreeMap<String, usize> = BTreeMap::new();
    for t in trees {
        *templates.entry(extract_template(t).to_string()).or_insert(0) += 1;
    }
    let words: usize = trees.iter().map(|t| t.words().len()).sum();
    let mean = if trees.is_empty() { 0.0 } else { words as f64 / trees.len() as f64 };
    let mut s = format!(
        "sentences: {}\nvocabulary: {}\nmean length: {mean:.2}\ntemplates: {}\n",
        trees.len(),
        vocab.len(),
        templates.len()
    );
    let mut ranked: Vec<_> = templates.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for (t, n) in ranked {
        let _ = writeln!(s, "  {n}\t{t}");
    }
    s
}
