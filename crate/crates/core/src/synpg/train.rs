use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::numerics::{adam_step, AdamState, Tape, Var};
use crate::tokenizer::{BagOfTokens, BOS, EOS, MAX_WORD_LEN, PAD};
use crate::parsekit::MAX_PARSE_LEN;
use crate::transformer::{self, Bound, Memory, ModelConfig, ModelError, Params, Provenance};

use super::SynpgError;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub word_dropout: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub max_word_len: usize,
    pub max_parse_len: usize,
    /// Draw a fresh dropout mask on every visit of an example; when off,
    /// each example keeps one mask for the whole run.
    pub resample_dropout: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            epochs: 5,
            word_dropout: 0.4,
            batch_size: 1,
            seed: 0,
            max_word_len: MAX_WORD_LEN,
            max_parse_len: MAX_PARSE_LEN,
            resample_dropout: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), SynpgError> {
        let bad = |m: &str| Err(SynpgError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.word_dropout) {
            return bad("word_dropout must be in [0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning_rate must be positive and weight_decay non-negative");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if self.max_word_len == 0 || self.max_parse_len == 0 {
            return bad("max lengths must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    pub steps: Vec<StepRecord>,
    /// Mean step loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainingReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }

    /// `epoch,step,loss` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,step,loss\n");
        for r in &self.steps {
            let _ = writeln!(s, "{},{},{}", r.epoch, r.step, r.loss);
        }
        s
    }
}

/// Removes each token independently with probability `rate`.
pub fn word_dropout<R: Rng + ?Sized>(bag: &BagOfTokens, rate: f64, rng: &mut R) -> BagOfTokens {
    let kept = bag
        .ids()
        .iter()
        .copied()
        .filter(|_| rng.gen::<f64>() >= rate)
        .collect();
    BagOfTokens::new(kept, bag.class)
}

/// One training instance in id space, without BOS/EOS.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Example {
    /// Semantic-encoder input: a sorted bag, or the ordered sentence for the
    /// ablation.
    pub sem: Vec<usize>,
    pub syn: Vec<usize>,
    pub target: Vec<usize>,
}

/// Teacher-forced loss of one example on a bound tape. `sem_positions`
/// marks an ordered semantic input; `rate > 0` applies word dropout to it.
pub(crate) fn example_loss<R: Rng + ?Sized>(
    tape: &mut Tape,
    b: &Bound,
    cfg: &ModelConfig,
    ex: &Example,
    sem_positions: bool,
    rate: f64,
    rng: &mut R,
) -> Result<Var, ModelError> {
    let sem: Vec<usize> = if rate > 0.0 {
        let bag = BagOfTokens::new(ex.sem.clone(), cfg.layout.sem);
        word_dropout(&bag, rate, rng).ids().to_vec()
    } else {
        ex.sem.clone()
    };
    let mut syn = ex.syn.clone();
    syn.push(EOS);
    let memory = Memory {
        sem: transformer::encode(tape, b, cfg, Provenance::Semantic, &sem, sem_positions)?,
        syn: transformer::encode(tape, b, cfg, Provenance::Syntactic, &syn, true)?,
    };
    let mut inputs = Vec::with_capacity(ex.target.len() + 1);
    inputs.push(BOS);
    inputs.extend_from_slice(&ex.target);
    let mut labels = ex.target.clone();
    labels.push(EOS);
    let logits = transformer::decode_logits(tape, b, cfg, &inputs, &memory)?;
    Ok(tape.cross_entropy(logits, &labels, PAD)?)
}

/// Shared training loop: seeded shuffling per epoch, per-example graphs
/// summed into mini-batch gradients, one Adam update per batch.
pub(crate) fn train_examples(
    config: &ModelConfig,
    params: &mut Params,
    examples: &[Example],
    sem_positions: bool,
    rate: f64,
    cfg: &TrainingConfig,
) -> Result<TrainingReport, SynpgError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(SynpgError::EmptyCorpus);
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(cfg.learning_rate, cfg.weight_decay);
    let mut report = TrainingReport::default();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        let mut epoch_steps = 0;
        for batch in order.chunks(cfg.batch_size) {
            params.zero_grads();
            let mut batch_total = 0.0;
            for &i in batch {
                let mut tape = Tape::new();
                let b = params.bind(&mut tape, true)?;
                let loss = if cfg.resample_dropout {
                    example_loss(&mut tape, &b, config, &examples[i], sem_positions, rate, &mut rng)?
                } else {
                    let mut fixed = Xoshiro256PlusPlus::seed_from_u64(
                        cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                    );
                    example_loss(&mut tape, &b, config, &examples[i], sem_positions, rate, &mut fixed)?
                };
                let value = tape.value(loss).item();
                if !value.is_finite() {
                    return Err(SynpgError::NonFinite {
                        epoch,
                        step,
                        example: i,
                        loss: value,
                    });
                }
                batch_total += value;
                let scaled = tape.scale(loss, 1.0 / batch.len() as f64);
                tape.backward(scaled)?;
                let vars = b.vars().to_vec();
                drop(b);
                params.collect_grads(&mut tape, &vars);
            }
            adam_step(params.tensors_mut(), &mut adam)?;
            let loss = batch_total / batch.len() as f64;
            report.steps.push(StepRecord { epoch, step, loss });
            epoch_total += loss;
            epoch_steps += 1;
            step += 1;
        }
        report.epoch_losses.push(epoch_total / epoch_steps as f64);
    }
    params.zero_grads();
    Ok(report)
}
