//! Parse generator: the SynPG architecture with a tag bag as semantic input,
//! a template as syntactic input, and a full linearized parse as output.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::parsekit::{
    delinearize_tokens, extract_template, linearize, tag_sequence, LinearizedParse, ParseTree,
    TagSequence, Template,
};
use crate::synpg::{
    check_vocab_sizes, round_params, run_generation, train_examples, Checkpoint, CheckpointError,
    Example, ModelKind, SynpgError, TrainingConfig, TrainingReport,
};
use crate::tokenizer::{decode, encode, to_bag, TokenClass, TokenSequence, Vocab, EOS};
use crate::transformer::{Layout, ModelConfig, Params, Strategy};

/// Beam width of the single retry after an invalid greedy parse.
pub const RETRY_BEAM: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct ParseGeneratorModel {
    pub config: ModelConfig,
    pub params: Params,
    pub vocab: Vocab,
}

impl ParseGeneratorModel {
    pub fn new(vocab: Vocab, seed: u64) -> Result<Self, SynpgError> {
        let config = ModelConfig::desk(
            Layout::PARSEGEN,
            vocab.words.len(),
            vocab.parse.len(),
            vocab.tags.len(),
        );
        Self::with_config(vocab, config, seed)
    }

    pub fn with_config(vocab: Vocab, config: ModelConfig, seed: u64) -> Result<Self, SynpgError> {
        if config.layout != Layout::PARSEGEN {
            return Err(SynpgError::Mismatch("layout is not the parse generator's".into()));
        }
        check_vocab_sizes(&config, &vocab)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = Params::init(&config, &mut rng)?;
        Ok(Self {
            config,
            params,
            vocab,
        })
    }

    fn tag_bag(&self, tags: &TagSequence) -> Result<Vec<usize>, SynpgError> {
        let seq = encode(tags.tags(), &self.vocab, TokenClass::Tag);
        Ok(to_bag(&seq)?.ids().to_vec())
    }

    fn parse_ids(&self, parse: &LinearizedParse) -> Vec<usize> {
        encode(parse.tokens(), &self.vocab, TokenClass::Parse).ids
    }

    fn example(&self, tree: &ParseTree) -> Result<Example, SynpgError> {
        let tags = tag_sequence(tree);
        if tags.is_empty() {
            return Err(SynpgError::EmptySentence);
        }
        Ok(Example {
            sem: self.tag_bag(&tags)?,
            syn: self.parse_ids(&extract_template(tree).linearized()),
            target: self.parse_ids(&linearize(tree)),
        })
    }
}

impl From<&ParseGeneratorModel> for Checkpoint {
    fn from(m: &ParseGeneratorModel) -> Self {
        Checkpoint {
            kind: ModelKind::ParseGen,
            config: m.config.clone(),
            params: m.params.clone(),
            vocab: m.vocab.clone(),
            disentangled: true,
        }
    }
}

impl TryFrom<Checkpoint> for ParseGeneratorModel {
    type Error = CheckpointError;

    fn try_from(c: Checkpoint) -> Result<Self, CheckpointError> {
        let (config, params, vocab) = c.into_parts(ModelKind::ParseGen)?;
        Ok(Self {
            config,
            params,
            vocab,
        })
    }
}

/// Trains on (tag bag, template) -> full parse triples read off `corpus`.
/// Tags are never dropped; `cfg.word_dropout` is ignored.
pub fn train_parse_generator(
    model: &mut ParseGeneratorModel,
    corpus: &[ParseTree],
    cfg: &TrainingConfig,
) -> Result<TrainingReport, SynpgError> {
    let examples: Vec<Example> = corpus.iter().map(|t| model.example(t)).collect::<Result<_, _>>()?;
    let report = train_examples(&model.config, &mut model.params, &examples, false, 0.0, cfg)?;
    round_params(&mut model.params);
    Ok(report)
}

/// Outcome tallies over a run of [`generate_full_parse`] calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub accepted: usize,
    /// Accepted only after the beam retry.
    pub retried: usize,
    pub rejected: usize,
}

impl GenerationStats {
    pub fn record<T, E>(&mut self, result: &Result<(T, bool), E>) {
        match result {
            Ok((_, retried)) => {
                self.accepted += 1;
                self.retried += usize::from(*retried);
            }
            Err(_) => self.rejected += 1,
        }
    }
}

/// Decodes a full parse for `tags` shaped by `template`. An invalid decode
/// is retried once with a beam of [`RETRY_BEAM`]; a second failure is
/// [`SynpgError::ParseRejected`].
pub fn generate_full_parse(
    model: &ParseGeneratorModel,
    tags: &TagSequence,
    template: &Template,
    strategy: Strategy,
) -> Result<LinearizedParse, SynpgError> {
    generate_full_parse_tracked(model, tags, template, strategy).map(|(p, _)| p)
}

/// [`generate_full_parse`], also reporting whether the retry was needed.
pub fn generate_full_parse_tracked(
    model: &ParseGeneratorModel,
    tags: &TagSequence,
    template: &Template,
    strategy: Strategy,
) -> Result<(LinearizedParse, bool), SynpgError> {
    if tags.is_empty() {
        return Err(SynpgError::EmptySentence);
    }
    let sem = model.tag_bag(tags)?;
    let mut syn = model.parse_ids(&template.linearized());
    syn.push(EOS);
    let attempt = |strategy| -> Result<Result<LinearizedParse, _>, SynpgError> {
        let ids = run_generation(
            &model.config,
            &model.params,
            &sem,
            false,
            &syn,
            strategy,
            model.config.max_parse_len,
        )?;
        let tokens = decode(
            &TokenSequence {
                ids,
                class: TokenClass::Parse,
            },
            &model.vocab,
        );
        Ok(delinearize_tokens(&tokens).map(|tree| linearize(&tree)))
    };
    match attempt(strategy)? {
        Ok(p) => Ok((p, false)),
        Err(_) => match attempt(Strategy::Beam(RETRY_BEAM))? {
            Ok(p) => Ok((p, true)),
            Err(e) => Err(SynpgError::ParseRejected(e)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsekit::{parse_ptb_line, pcfg_sample, toy_grammar};
    use crate::synpg::{load_checkpoint, save_checkpoint};
    use crate::tokenizer::build_vocab_from_trees;

    fn trees(n: usize, seed: u64) -> Vec<ParseTree> {
        let g = toy_grammar();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        (0..n).map(|_| pcfg_sample(&g, &mut rng, 12).unwrap().1).collect()
    }

    fn small(corpus: &[ParseTree]) -> ParseGeneratorModel {
        let vocab = build_vocab_from_trees(corpus, 1, 10_000).unwrap();
        let mut cfg =
            ModelConfig::desk(Layout::PARSEGEN, vocab.words.len(), vocab.parse.len(), vocab.tags.len());
        cfg.d_model = 16;
        cfg.n_heads = 2;
        cfg.d_ffn = 32;
        cfg.n_layers_enc_sem = 1;
        cfg.n_layers_enc_syn = 1;
        cfg.n_layers_dec = 1;
        ParseGeneratorModel::with_config(vocab, cfg, 5).unwrap()
    }

    #[test]
    fn memorizes_single_tree() {
        let tree = parse_ptb_line("(S (NP-SBJ (PRP he)) (VP (VBD saw) (NP-OBJ (DT a) (NN cup))) (. .))").unwrap();
        let corpus = vec![tree.clone()];
        let mut model = small(&corpus);
        let cfg = TrainingConfig {
            learning_rate: 3e-3,
            epochs: 150,
            ..Default::default()
        };
        let report = train_parse_generator(&mut model, &corpus, &cfg).unwrap();
        assert!(report.final_loss().unwrap() < 0.05, "loss {:?}", report.final_loss());
        let out = generate_full_parse(&model, &tag_sequence(&tree), &extract_template(&tree), Strategy::Greedy)
            .unwrap();
        assert_eq!(out, linearize(&tree.strip_terminals()));
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = trees(6, 2);
        let cfg = TrainingConfig {
            epochs: 1,
            ..Default::default()
        };
        let mut a = small(&corpus);
        let mut b = a.clone();
        let ra = train_parse_generator(&mut a, &corpus, &cfg).unwrap();
        let rb = train_parse_generator(&mut b, &corpus, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn tag_order_is_irrelevant() {
        let corpus = trees(4, 3);
        let model = small(&corpus);
        let tags = tag_sequence(&corpus[0]);
        let mut shuffled = tags.clone();
        shuffled.0.reverse();
        let template = extract_template(&corpus[0]);
        let a = generate_full_parse_tracked(&model, &tags, &template, Strategy::Greedy);
        let b = generate_full_parse_tracked(&model, &shuffled, &template, Strategy::Greedy);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn untrained_output_is_valid_or_rejected() {
        let corpus = trees(8, 4);
        let model = small(&corpus);
        let mut stats = GenerationStats::default();
        for t in &corpus {
            let r = generate_full_parse_tracked(&model, &tag_sequence(t), &extract_template(t), Strategy::Greedy);
            match &r {
                Ok((p, _)) => assert!(crate::parsekit::delinearize(p).is_ok()),
                Err(e) => assert!(matches!(e, SynpgError::ParseRejected(_)), "{e}"),
            }
            stats.record(&r);
        }
        assert_eq!(stats.accepted + stats.rejected, corpus.len());
    }

    #[test]
    fn checkpoint_kind_roundtrip() {
        let corpus = trees(3, 5);
        let mut model = small(&corpus);
        round_params(&mut model.params);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pg.ckpt");
        save_checkpoint(&Checkpoint::from(&model), &path).unwrap();
        let ckpt = load_checkpoint(&path).unwrap();
        assert_eq!(ckpt.kind, ModelKind::ParseGen);
        assert!(ckpt.clone().into_synpg().is_err());
        let back = ParseGeneratorModel::try_from(ckpt).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn empty_tags_rejected() {
        let corpus = trees(2, 6);
        let model = small(&corpus);
        let template = extract_template(&corpus[0]);
        let err = generate_full_parse(&model, &TagSequence(Vec::new()), &template, Strategy::Greedy);
        assert!(matches!(err, Err(SynpgError::EmptySentence)));
    }
}
