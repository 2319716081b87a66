//! `synpg`: corpus generation, training, evaluation, generation and
//! augmentation over the SynPG library.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use synpg::numerics::NumericsError;
use synpg::synpg::SynpgError;
use synpg::transformer::ModelError;

#[derive(Parser, Debug)]
#[command(name = "synpg", version, about = "Syntactically controlled paraphrase generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a parsed corpus (and optionally evaluation pairs) from a grammar.
    GenCorpus(commands::gen_corpus::Args),
    /// Train a SynPG model, its non-disentangled ablation, or a parse generator.
    Train(commands::train::Args),
    /// Score paraphrases of (source, target) pairs with BLEU and template match.
    Eval(commands::eval::Args),
    /// Paraphrase one sentence, or a batch file, following a template or parse.
    Generate(commands::generate::Args),
    /// Add template-driven paraphrases to a labelled dataset.
    Augment(commands::augment::Args),
    /// Linearize, extract templates or tags, or CKY-parse, line by line.
    ParseTools(commands::parse_tools::Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKindArg {
    Synpg,
    Parsegen,
    Ablation,
}

/// Numeric failures exit 3; every other error is treated as bad input.
fn exit_code(err: &anyhow::Error) -> u8 {
    let non_finite = |m: Option<&ModelError>| matches!(m, Some(ModelError::Numerics(NumericsError::NonFinite(_))));
    let numeric = err.chain().any(|cause| match cause.downcast_ref::<SynpgError>() {
        Some(SynpgError::NonFinite { .. }) => true,
        Some(SynpgError::Model(m)) => non_finite(Some(m)),
        _ => non_finite(cause.downcast_ref::<ModelError>()),
    });
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Generate(a) => commands::generate::run(a),
        Command::Augment(a) => commands::augment::run(a),
        Command::ParseTools(a) => commands::parse_tools::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Shared `--config` flag.
#[derive(clap::Args, Debug, Clone)]
pub struct ConfigArg {
    /// TOML run configuration; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArg {
    pub fn load(&self) -> anyhow::Result<config::RunConfig> {
        let mut c = config::RunConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }
}
