use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use synpg::parsekit::{cky_parse, delinearize, extract_template, Grammar, ParseTree, Template};
use synpg::pipeline::{paraphrase_from_template, FilterThresholds, TemplateParaphrase};
use synpg::synpg::SynPGModel;
use synpg::tokenizer::{encode, TokenClass};

use crate::io::{lines, load_grammar, load_parsegen, load_synpg, parse_tree, read_text, read_trees, write_text};
use crate::ConfigArg;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    pub synpg: PathBuf,
    #[arg(long)]
    pub parsegen: PathBuf,
    /// `label<TAB>sentence<TAB>parse` lines.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Paraphrases attempted per example.
    #[arg(long)]
    pub k: Option<usize>,
    /// Corpus whose templates form the inventory; the dataset's own parses
    /// when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Grammar used to parse outputs; without it the generated full parse is
    /// aligned with the output words.
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub min_ngram_overlap: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub min_similarity: Option<f64>,
    /// Per-template acceptance report (TSV).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub common: ConfigArg,
}

struct Example<'a> {
    label: &'a str,
    line: &'a str,
    words: Vec<&'a str>,
    tree: ParseTree,
}

/// Frequency-ranked templates, most frequent first, ties by string.
pub fn template_inventory(trees: &[ParseTree]) -> Vec<(Template, usize)> {
    let mut counts: BTreeMap<String, (Template, usize)> = BTreeMap::new();
    for t in trees {
        let tpl = extract_template(t);
        counts.entry(tpl.to_string()).or_insert((tpl, 0)).1 += 1;
    }
    let mut ranked: Vec<(String, (Template, usize))> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().map(|(_, v)| v).collect()
}

#[derive(Default)]
struct Tally {
    requested: usize,
    accepted: usize,
    rejections: BTreeMap<&'static str, usize>,
}

/// The tree recorded for an accepted output and the reason it is unusable.
fn output_tree(
    out: &TemplateParaphrase,
    words: &[String],
    grammar: Option<&Grammar>,
    source: &Template,
) -> Result<ParseTree, &'static str> {
    let tree = match grammar {
        Some(g) => cky_parse(g, words).ok_or("unparseable")?,
        None => delinearize(&out.parse)
            .ok()
            .and_then(|t| t.with_words(words))
            .ok_or("length-mismatch")?,
    };
    if &extract_template(&tree) == source {
        return Err("same-template");
    }
    Ok(tree)
}

fn augment_one(
    synpg: &SynPGModel,
    parsegen: &synpg::parsegen::ParseGeneratorModel,
    ex: &Example<'_>,
    template: &Template,
    grammar: Option<&Grammar>,
    thresholds: &FilterThresholds,
    taken: &mut HashSet<Template>,
) -> Result<String, &'static str> {
    let seq = encode(&ex.words, &synpg.vocab, TokenClass::Word);
    let out = paraphrase_from_template(synpg, parsegen, &seq, &ex.tree, template, thresholds)
        .map_err(|r| r.as_str())?;
    let words = synpg.decode_words(&out.paraphrase);
    let tree = output_tree(&out, &words, grammar, &extract_template(&ex.tree))?;
    if !taken.insert(extract_template(&tree)) {
        return Err("duplicate-template");
    }
    Ok(format!("{}\t{}\t{tree}\n", ex.label, words.join(" ")))
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = args.common.load()?;
    if let Some(k) = args.k {
        cfg.augment.k = k;
    }
    if let Some(v) = args.min_ngram_overlap {
        cfg.filter.min_ngram_overlap = v;
    }
    if let Some(v) = args.min_similarity {
        cfg.filter.min_similarity = v;
    }
    cfg.echo();
    let thresholds = cfg.filter.thresholds();
    thresholds.validate()?;
    let text = read_text(&args.dataset)?;
    let examples: Vec<Example<'_>> = lines(&text)
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            let [label, sentence, ptb] = fields[..] else {
                return Err(anyhow!("dataset line {i}: expected label, sentence and parse"));
            };
            let words: Vec<&str> = sentence.split_whitespace().collect();
            if words.is_empty() {
                return Err(anyhow!("dataset line {i}: empty sentence"));
            }
            Ok(Example {
                label,
                line,
                words,
                tree: parse_tree(i, ptb, "dataset")?,
            })
        })
        .collect::<Result<_>>()?;
    let mut out = String::new();
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    if cfg.augment.k > 0 && !examples.is_empty() {
        let synpg = load_synpg(&args.synpg)?;
        let parsegen = load_parsegen(&args.parsegen)?;
        let grammar = args.grammar.as_deref().map(|p| load_grammar(Some(p))).transpose()?;
        let inventory_trees = match &args.corpus {
            Some(p) => read_trees(p)?,
            None => examples.iter().map(|e| e.tree.clone()).collect(),
        };
        let inventory = template_inventory(&inventory_trees);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
        for ex in &examples {
            let own = extract_template(&ex.tree);
            let candidates: Vec<&(Template, usize)> = inventory.iter().filter(|(t, _)| *t != own).collect();
            let chosen: Vec<&Template> = candidates
                .choose_multiple_weighted(&mut rng, cfg.augment.k, |c| c.1 as f64)
                .map_err(|e| anyhow!("template sampling: {e}"))?
                .map(|c| &c.0)
                .collect();
            let mut taken = HashSet::new();
            for template in chosen {
                let tally = tallies.entry(template.to_string()).or_default();
                tally.requested += 1;
                match augment_one(&synpg, &parsegen, ex, template, grammar.as_ref(), &thresholds, &mut taken) {
                    Ok(line) => {
                        tally.accepted += 1;
                        out.push_str(&line);
                    }
                    Err(reason) => *tally.rejections.entry(reason).or_insert(0) += 1,
                }
            }
        }
    }
    for ex in &examples {
        out.push_str(ex.line);
        out.push('\n');
    }
    write_text(&args.out, &out)?;
    let report = render_report(&tallies);
    print!("{report}");
    if let Some(p) = &args.report {
        write_text(p, &report)?;
    }
    Ok(())
}

fn render_report(tallies: &BTreeMap<String, Tally>) -> String {
    let mut s = String::from("template\trequested\taccepted\trate\trejections\n");
    let (mut req, mut acc) = (0, 0);
    for (t, tally) in tallies {
        req += tally.requested;
        acc += tally.accepted;
        let reasons: Vec<String> = tally.rejections.iter().map(|(r, n)| format!("{r}={n}")).collect();
        let _ = writeln!(
            s,
            "{t}\t{}\t{}\t{:.3}\t{}",
            tally.requested,
            tally.accepted,
            tally.accepted as f64 / tally.requested.max(1) as f64,
            reasons.join(",")
        );
    }
    let _ = writeln!(s, "total\t{req}\t{acc}\t{:.3}\t", acc as f64 / req.max(1) as f64);
    s
}
