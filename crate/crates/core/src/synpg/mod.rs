//! The SynPG model: a bag-of-words semantic encoder and a parse encoder
//! feeding one decoder, trained to reconstruct each sentence from its own
//! words and parse.

mod checkpoint;
mod embeddings;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, write_atomic, Checkpoint, CheckpointError, ModelKind,
};
pub use embeddings::{
    corpus_embeddings, format_embeddings, load_pretrained_embeddings, CorpusEmbeddingConfig,
};
pub use train::{word_dropout, StepRecord, TrainingConfig, TrainingReport};
pub(crate) use train::{train_examples, Example};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::numerics::{NumericsError, Tape, Tensor};
use crate::parsekit::{linearize, LinearizedParse, ParseTree, StructureError};
use crate::tokenizer::{encode, to_bag, TokenClass, TokenSequence, Vocab, VocabError, EOS};
use crate::transformer::{
    self, Layout, Memory, ModelConfig, ModelError, Params, Provenance, Strategy,
};

#[derive(Debug, Error)]
pub enum SynpgError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("empty sentence")]
    EmptySentence,
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step} (example {example})")]
    NonFinite {
        epoch: usize,
        step: usize,
        example: usize,
        loss: f64,
    },
    #[error("model kind mismatch: {0}")]
    Mismatch(String),
    #[error("generated parse rejected after retry: {0}")]
    ParseRejected(StructureError),
}

impl From<NumericsError> for SynpgError {
    fn from(e: NumericsError) -> Self {
        SynpgError::Model(e.into())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynPGModel {
    pub config: ModelConfig,
    pub params: Params,
    pub vocab: Vocab,
    /// `false` selects the ablation whose semantic encoder reads the ordered
    /// sentence with positions.
    pub disentangled: bool,
}

impl SynPGModel {
    /// Randomly initialized model with desk-scale dimensions.
    pub fn new(vocab: Vocab, disentangled: bool, seed: u64) -> Result<Self, SynpgError> {
        let config = ModelConfig::desk(
            Layout::SYNPG,
            vocab.words.len(),
            vocab.parse.len(),
            vocab.tags.len(),
        );
        Self::with_config(vocab, config, disentangled, seed)
    }

    pub fn with_config(
        vocab: Vocab,
        config: ModelConfig,
        disentangled: bool,
        seed: u64,
    ) -> Result<Self, SynpgError> {
        if config.layout != Layout::SYNPG {
            return Err(SynpgError::Mismatch("layout is not SynPG".into()));
        }
        check_vocab_sizes(&config, &vocab)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let params = Params::init(&config, &mut rng)?;
        Ok(Self {
            config,
            params,
            vocab,
            disentangled,
        })
    }

    /// Encodes a sentence's words and its linearized parse.
    pub fn encode_pair(&self, tree: &ParseTree) -> (TokenSequence, TokenSequence) {
        let words = encode(&tree.words(), &self.vocab, TokenClass::Word);
        let parse = encode(linearize(tree).tokens(), &self.vocab, TokenClass::Parse);
        (words, parse)
    }

    pub fn encode_parse(&self, parse: &LinearizedParse) -> TokenSequence {
        encode(parse.tokens(), &self.vocab, TokenClass::Parse)
    }

    /// Ids fed to the semantic encoder and whether positions are added.
    fn semantic_input(&self, sentence: &TokenSequence) -> Result<(Vec<usize>, bool), SynpgError> {
        if self.disentangled {
            Ok((to_bag(sentence)?.ids().to_vec(), false))
        } else {
            Ok((sentence.ids.clone(), true))
        }
    }

    pub(crate) fn example(
        &self,
        sentence: &TokenSequence,
        parse: &TokenSequence,
    ) -> Result<Example, SynpgError> {
        if sentence.is_empty() {
            return Err(SynpgError::EmptySentence);
        }
        Ok(Example {
            sem: self.semantic_input(sentence)?.0,
            syn: parse.ids.clone(),
            target: sentence.ids.clone(),
        })
    }

    pub fn decode_words(&self, seq: &TokenSequence) -> Vec<String> {
        crate::tokenizer::decode(seq, &self.vocab)
    }

    /// Rounds every parameter to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        round_params(&mut self.params);
    }
}

pub(crate) fn round_params(params: &mut Params) {
    for t in params.tensors_mut() {
        t.values_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
}

pub(crate) fn check_vocab_sizes(config: &ModelConfig, vocab: &Vocab) -> Result<(), SynpgError> {
    for c in config.layout.embedded_classes() {
        if config.vocab(c) != vocab.table(c).len() {
            return Err(SynpgError::Mismatch(format!(
                "{c:?} vocabulary has {} entries, config expects {}",
                vocab.table(c).len(),
                config.vocab(c)
            )));
        }
    }
    Ok(())
}

/// Reconstruction loss of one sentence given its own parse: semantic input
/// is the (word-dropped) bag for SynPG or the ordered sentence for the
/// ablation; the decoder is teacher-forced on the full sentence.
pub fn reconstruction_loss<R: Rng + ?Sized>(
    model: &SynPGModel,
    sentence: &TokenSequence,
    parse: &LinearizedParse,
    rng: &mut R,
    cfg: &TrainingConfig,
) -> Result<Tensor, SynpgError> {
    let parse_ids = model.encode_parse(parse);
    let ex = model.example(sentence, &parse_ids)?;
    let rate = if model.disentangled { cfg.word_dropout } else { 0.0 };
    let mut tape = Tape::new();
    let b = model.params.bind(&mut tape, false)?;
    let loss = train::example_loss(&mut tape, &b, &model.config, &ex, !model.disentangled, rate, rng)?;
    Ok(tape.value(loss).clone())
}

/// Worst relative error between analytic and central-difference gradients
/// of the training loss on one sentence, probing at most `max_coords`
/// entries per parameter. Word dropout draws the same mask on every
/// evaluation.
pub fn loss_gradient_check(
    model: &SynPGModel,
    sentence: &TokenSequence,
    parse: &LinearizedParse,
    cfg: &TrainingConfig,
    h: f64,
    max_coords: usize,
) -> Result<f64, SynpgError> {
    let parse_ids = model.encode_parse(parse);
    let ex = model.example(sentence, &parse_ids)?;
    let rate = if model.disentangled { cfg.word_dropout } else { 0.0 };
    let worst = crate::numerics::finite_diff_check::<_, ModelError>(
        |tape, vars| {
            let b = transformer::Bound::from_vars(&model.params, vars.to_vec())?;
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
            train::example_loss(tape, &b, &model.config, &ex, !model.disentangled, rate, &mut rng)
        },
        model.params.tensors(),
        h,
        max_coords,
    )?;
    Ok(worst)
}

/// Trains on (sentence, own parse) pairs read off `corpus` trees.
pub fn train(
    model: &mut SynPGModel,
    corpus: &[ParseTree],
    cfg: &TrainingConfig,
) -> Result<TrainingReport, SynpgError> {
    let examples: Vec<Example> = corpus
        .iter()
        .map(|t| {
            let (w, p) = model.encode_pair(t);
            model.example(&w, &p)
        })
        .collect::<Result<_, _>>()?;
    let rate = if model.disentangled { cfg.word_dropout } else { 0.0 };
    let report = train_examples(
        &model.config,
        &mut model.params,
        &examples,
        !model.disentangled,
        rate,
        cfg,
    )?;
    model.round_to_f32();
    Ok(report)
}

/// Generates a sentence from `sentence`'s words following `target_parse`.
pub fn paraphrase(
    model: &SynPGModel,
    sentence: &TokenSequence,
    target_parse: &LinearizedParse,
    strategy: Strategy,
) -> Result<TokenSequence, SynpgError> {
    crate::parsekit::delinearize(target_parse)?;
    let mut syn = model.encode_parse(target_parse).ids;
    syn.push(EOS);
    let (sem, positions) = model.semantic_input(sentence)?;
    let ids = run_generation(
        &model.config,
        &model.params,
        &sem,
        positions,
        &syn,
        strategy,
        model.config.max_word_len,
    )?;
    Ok(TokenSequence {
        ids,
        class: TokenClass::Word,
    })
}

pub(crate) fn run_generation(
    config: &ModelConfig,
    params: &Params,
    sem: &[usize],
    sem_positions: bool,
    syn: &[usize],
    strategy: Strategy,
    max_len: usize,
) -> Result<Vec<usize>, ModelError> {
    let mut tape = Tape::new();
    let b = params.bind(&mut tape, false)?;
    let memory = Memory {
        sem: transformer::encode(&mut tape, &b, config, Provenance::Semantic, sem, sem_positions)?,
        syn: transformer::encode(&mut tape, &b, config, Provenance::Syntactic, syn, true)?,
    };
    transformer::generate_on(&mut tape, &b, config, &memory, strategy, max_len)
}
