use std::path::PathBuf;

use anyhow::{Context, Result};
use synpg::parsegen::{train_parse_generator, ParseGeneratorModel};
use synpg::parsekit::ParseTree;
use synpg::synpg::{
    corpus_embeddings, format_embeddings, load_pretrained_embeddings, save_checkpoint, train, Checkpoint,
    SynPGModel, TrainingReport,
};
use synpg::tokenizer::build_vocab_from_trees;
use synpg::transformer::Layout;

use crate::config::RunConfig;
use crate::io::{read_text, read_trees, write_text};
use crate::{ConfigArg, ModelKindArg};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_enum)]
    pub kind: ModelKindArg,
    /// Training corpus, one bracketed tree per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint output.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub word_dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// `corpus`, `random`, or a vector file.
    #[arg(long)]
    pub embeddings: Option<String>,
    #[command(flatten)]
    pub common: ConfigArg,
}

fn effective_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = args.common.load()?;
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.word_dropout {
        t.word_dropout = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = &args.embeddings {
        t.embeddings = v.clone();
    }
    Ok(cfg)
}

fn init_embeddings(model: &mut SynPGModel, corpus: &[ParseTree], cfg: &RunConfig) -> Result<()> {
    let text = match cfg.train.embeddings.as_str() {
        "random" => return Ok(()),
        "corpus" => {
            let sentences: Vec<Vec<&str>> = corpus.iter().map(|t| t.words()).collect();
            let rows = corpus_embeddings(&sentences, &model.vocab, model.config.d_model, &cfg.embedding())?;
            format_embeddings(&rows)
        }
        path => read_text(path.as_ref())?,
    };
    let n = load_pretrained_embeddings(model, &text).context("loading word embeddings")?;
    println!("embeddings: {} ({n} rows)", cfg.train.embeddings);
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    let cfg = effective_config(&args)?;
    cfg.echo();
    let training = cfg.training();
    training.validate()?;
    let corpus = read_trees(&args.corpus)?;
    let vocab = build_vocab_from_trees(&corpus, cfg.train.min_count, cfg.train.max_vocab)?;
    let (w, p, t) = (vocab.words.len(), vocab.parse.len(), vocab.tags.len());
    println!("vocabulary: words {w}, parse {p}, tags {t}");
    let (checkpoint, report): (Checkpoint, TrainingReport) = match args.kind {
        ModelKindArg::Synpg | ModelKindArg::Ablation => {
            let model_cfg = cfg.model.model_config(Layout::SYNPG, w, p, t);
            let disentangled = args.kind == ModelKindArg::Synpg;
            let mut model = SynPGModel::with_config(vocab, model_cfg, disentangled, cfg.seed)?;
            init_embeddings(&mut model, &corpus, &cfg)?;
            println!("parameters: {}", model.params.scalar_count());
            let report = train(&mut model, &corpus, &training)?;
            ((&model).into(), report)
        }
        ModelKindArg::Parsegen => {
            let model_cfg = cfg.model.model_config(Layout::PARSEGEN, w, p, t);
            let mut model = ParseGeneratorModel::with_config(vocab, model_cfg, cfg.seed)?;
            println!("parameters: {}", model.params.scalar_count());
            let report = train_parse_generator(&mut model, &corpus, &training)?;
            ((&model).into(), report)
        }
    };
    save_checkpoint(&checkpoint, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let csv_path = args.loss_csv.clone().unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".loss.csv");
        PathBuf::from(s)
    });
    write_text(&csv_path, &report.to_csv())?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {}: mean loss {l:.6}", e + 1);
    }
    println!("final loss: {:.6}", report.final_loss().unwrap_or(f64::NAN));
    println!("checkpoint: {}", args.out.display());
    Ok(())
}
