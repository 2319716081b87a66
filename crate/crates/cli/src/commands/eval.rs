use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use synpg::evalkit::{evaluate_pairs, EvalMode, EvalSetup};

use crate::io::{load_grammar, load_parsegen, load_synpg, read_pairs, require, write_text};
use crate::ConfigArg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Parse,
    Template,
    CopyInput,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// SynPG or ablation checkpoint (not needed for copy-input).
    #[arg(long)]
    pub synpg: Option<PathBuf>,
    /// Parse generator checkpoint, for template mode.
    #[arg(long)]
    pub parsegen: Option<PathBuf>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// `x1<TAB>x2` tree pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value = "parse")]
    pub mode: ModeArg,
    /// Receives `report.json` and `pairs.tsv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub min_ngram_overlap: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub min_similarity: Option<f64>,
    #[command(flatten)]
    pub common: ConfigArg,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = args.common.load()?;
    if let Some(v) = args.min_ngram_overlap {
        cfg.filter.min_ngram_overlap = v;
    }
    if let Some(v) = args.min_similarity {
        cfg.filter.min_similarity = v;
    }
    cfg.echo();
    let thresholds = cfg.filter.thresholds();
    thresholds.validate()?;
    let pairs = read_pairs(&args.pairs)?;
    if pairs.is_empty() {
        bail!("pairs file {} is empty", args.pairs.display());
    }
    let grammar = load_grammar(args.grammar.as_deref())?;
    let mode = match args.mode {
        ModeArg::Parse => EvalMode::Parse,
        ModeArg::Template => EvalMode::Template,
        ModeArg::CopyInput => EvalMode::CopyInput,
    };
    let synpg = match mode {
        EvalMode::CopyInput => None,
        _ => Some(load_synpg(require(&args.synpg, "synpg")?)?),
    };
    let parsegen = match mode {
        EvalMode::Template => Some(load_parsegen(require(&args.parsegen, "parsegen")?)?),
        _ => None,
    };
    let setup = EvalSetup {
        synpg: synpg.as_ref(),
        parsegen: parsegen.as_ref(),
        grammar: &grammar,
        mode,
        thresholds,
    };
    let report = evaluate_pairs(&setup, &pairs)?;
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    write_text(&args.out_dir.join("report.json"), &report.to_text())?;
    write_text(&args.out_dir.join("pairs.tsv"), &report.records_tsv())?;
    print!("{}", report.to_text());
    Ok(())
}
