use std::cmp::Ordering;

use crate::numerics::{log_sum_exp, Tape};
use crate::tokenizer::{TokenSequence, BOS, EOS, PAD};

use super::{decode_logits, Bound, EmbeddingSequence, Memory, ModelConfig, ModelError, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Greedy,
    /// Beam search with the given width (0 behaves as 1).
    Beam(usize),
}

/// PAD and BOS are never emitted.
fn allowed(t: usize) -> bool {
    t != PAD && t != BOS
}

fn last_row(tape: &mut Tape, b: &Bound, cfg: &ModelConfig, prefix: &[usize], m: &Memory) -> Result<Vec<f64>, ModelError> {
    let mut inputs = Vec::with_capacity(prefix.len() + 1);
    inputs.push(BOS);
    inputs.extend_from_slice(prefix);
    let logits = decode_logits(tape, b, cfg, &inputs, m)?;
    let t = tape.value(logits);
    Ok(t.row(t.rows() - 1).to_vec())
}

#[derive(Clone, Debug)]
struct Hyp {
    /// Emitted tokens, including a final EOS once finished.
    tokens: Vec<usize>,
    score: f64,
}

impl Hyp {
    fn done(&self) -> bool {
        self.tokens.last() == Some(&EOS)
    }
}

fn rank(a: &Hyp, b: &Hyp) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Autoregressive decoding on an already-bound tape.
pub(crate) fn generate_on(
    tape: &mut Tape,
    b: &Bound,
    cfg: &ModelConfig,
    memory: &Memory,
    strategy: Strategy,
    max_len: usize,
) -> Result<Vec<usize>, ModelError> {
    // room for the BOS input position
    let max_len = max_len.min(cfg.limit(cfg.layout.out) - 1);
    match strategy {
        Strategy::Greedy => {
            let mut out = Vec::new();
            while out.len() < max_len {
                let row = last_row(tape, b, cfg, &out, memory)?;
                let mut best = None::<(usize, f64)>;
                for (t, &v) in row.iter().enumerate() {
                    if allowed(t) && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((t, v));
                    }
                }
                let (t, _) = best.expect("vocabulary has emittable tokens");
                if t == EOS {
                    break;
                }
                out.push(t);
            }
            Ok(out)
        }
        Strategy::Beam(k) => {
            let k = k.max(1);
            let mut beam = vec![Hyp {
                tokens: Vec::new(),
                score: 0.0,
            }];
            for _ in 0..max_len {
                if beam.iter().all(Hyp::done) {
                    break;
                }
                let mut cands = Vec::new();
                for h in &beam {
                    if h.done() {
                        cands.push(h.clone());
                        continue;
                    }
                    let row = last_row(tape, b, cfg, &h.tokens, memory)?;
                    let lse = log_sum_exp(&row);
                    for (t, &v) in row.iter().enumerate().filter(|(t, _)| allowed(*t)) {
                        let mut tokens = h.tokens.clone();
                        tokens.push(t);
                        cands.push(Hyp {
                            tokens,
                            score: h.score + v - lse,
                        });
                    }
                }
                cands.sort_by(rank);
                cands.truncate(k);
                beam = cands;
            }
            let mut best = beam.into_iter().min_by(rank).expect("non-empty beam").tokens;
            if best.last() == Some(&EOS) {
                best.pop();
            }
            Ok(best)
        }
    }
}

/// Decodes from BOS until EOS or `max_len` tokens (capped at the output
/// class limit). Greedy ties go to the lowest id; beam ties to the
/// lexicographically smallest sequence.
pub fn generate(
    params: &Params,
    cfg: &ModelConfig,
    memory_sem: &EmbeddingSequence,
    memory_syn: &EmbeddingSequence,
    strategy: Strategy,
    max_len: usize,
) -> Result<TokenSequence, ModelError> {
    let mut tape = Tape::new();
    let b = params.bind(&mut tape, false)?;
    let mut constant = |m: &EmbeddingSequence| -> Result<_, ModelError> {
        m.values
            .as_ref()
            .map(|t| tape.constant(t.clone()))
            .transpose()
            .map_err(ModelError::from)
    };
    let memory = Memory {
        sem: constant(memory_sem)?,
        syn: constant(memory_syn)?,
    };
    let ids = generate_on(&mut tape, &b, cfg, &memory, strategy, max_len)?;
    Ok(TokenSequence {
        ids,
        class: cfg.layout.out,
    })
}
