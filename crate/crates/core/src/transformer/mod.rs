//! Pre-norm Transformer encoder/decoder stacks on the [`Tape`].
//!
//! Parameters live in a flat, named [`Params`] store. A forward pass binds
//! every tensor onto a tape once ([`Params::bind`]) and then refers to them
//! by name.

mod decode;
mod layers;

pub use decode::{generate, Strategy};
pub(crate) use decode::generate_on;
pub use layers::{decode_logits, encode, sinusoidal_positions, Memory};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::numerics::{NumericsError, Tape, Tensor, Var};
use crate::parsekit::MAX_PARSE_LEN;
use crate::tokenizer::{TokenClass, MAX_WORD_LEN};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("input of length {len} exceeds the limit of {limit}")]
    TooLong { len: usize, limit: usize },
    #[error("missing parameter '{0}'")]
    MissingParam(String),
    #[error("memory width {got} does not match d_model {expected}")]
    Width { expected: usize, got: usize },
    #[error("decoder needs at least one non-empty memory")]
    NoMemory,
}

/// Which token class each stream of a model reads or writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub sem: TokenClass,
    pub syn: TokenClass,
    pub out: TokenClass,
}

impl Layout {
    /// Words in (as a bag), parse in, words out.
    pub const SYNPG: Layout = Layout {
        sem: TokenClass::Word,
        syn: TokenClass::Parse,
        out: TokenClass::Word,
    };
    /// Tags in (as a bag), template in, full parse out.
    pub const PARSEGEN: Layout = Layout {
        sem: TokenClass::Tag,
        syn: TokenClass::Parse,
        out: TokenClass::Parse,
    };

    /// Distinct classes needing an embedding table, in a fixed order.
    pub fn embedded_classes(&self) -> Vec<TokenClass> {
        let mut v = Vec::new();
        for c in [TokenClass::Word, TokenClass::Parse, TokenClass::Tag] {
            if [self.sem, self.syn, self.out].contains(&c) {
                v.push(c);
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers_enc_sem: usize,
    pub n_layers_enc_syn: usize,
    pub n_layers_dec: usize,
    pub d_ffn: usize,
    pub max_word_len: usize,
    pub max_parse_len: usize,
    pub word_vocab: usize,
    pub parse_vocab: usize,
    pub tag_vocab: usize,
    pub layout: Layout,
}

impl ModelConfig {
    /// Desk-scale defaults for the given vocabulary sizes.
    pub fn desk(layout: Layout, word_vocab: usize, parse_vocab: usize, tag_vocab: usize) -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_layers_enc_sem: 2,
            n_layers_enc_syn: 2,
            n_layers_dec: 2,
            d_ffn: 256,
            max_word_len: MAX_WORD_LEN,
            max_parse_len: MAX_PARSE_LEN,
            word_vocab,
            parse_vocab,
            tag_vocab,
            layout,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ffn", self.d_ffn),
            ("max_word_len", self.max_word_len),
            ("max_parse_len", self.max_parse_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        for c in self.layout.embedded_classes() {
            if self.vocab(c) <= crate::tokenizer::RESERVED.len() {
                return Err(ModelError::Config(format!("{c:?} vocabulary too small")));
            }
        }
        Ok(())
    }

    pub fn vocab(&self, class: TokenClass) -> usize {
        match class {
            TokenClass::Word => self.word_vocab,
            TokenClass::Parse => self.parse_vocab,
            TokenClass::Tag => self.tag_vocab,
        }
    }

    /// Longest sequence of `class` accepted by an encoder or produced by
    /// the decoder, including one slot for EOS.
    pub fn limit(&self, class: TokenClass) -> usize {
        match class {
            TokenClass::Word | TokenClass::Tag => self.max_word_len + 1,
            TokenClass::Parse => self.max_parse_len + 1,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Total scalar parameter count:
    /// embeddings `Σ V_c·d`; per encoder layer `4d² + 2d·f + 8d + f`;
    /// per decoder layer `8d² + 2d·f + 13d + f`; a final `2d` norm per stack;
    /// `2d` segment embedding; output projection `d·V + V`.
    pub fn param_count(&self) -> usize {
        let (d, f) = (self.d_model, self.d_ffn);
        let emb: usize = self
            .layout
            .embedded_classes()
            .iter()
            .map(|&c| self.vocab(c) * d)
            .sum();
        let enc = 4 * d * d + 2 * d * f + 8 * d + f;
        let dec = 8 * d * d + 2 * d * f + 13 * d + f;
        let v = self.vocab(self.layout.out);
        emb + (self.n_layers_enc_sem + self.n_layers_enc_syn) * enc
            + self.n_layers_dec * dec
            + 3 * 2 * d
            + 2 * d
            + d * v
            + v
    }
}

pub(crate) fn class_key(c: TokenClass) -> &'static str {
    match c {
        TokenClass::Word => "word",
        TokenClass::Parse => "parse",
        TokenClass::Tag => "tag",
    }
}

/// Named parameter tensors in a fixed creation order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl Params {
    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor>) -> Result<Self, ModelError> {
        if names.len() != tensors.len() {
            return Err(ModelError::Config("names and tensors differ in count".into()));
        }
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if index.len() != names.len() {
            return Err(ModelError::Config("duplicate parameter name".into()));
        }
        Ok(Self {
            names,
            tensors,
            index,
        })
    }

    /// Random initialization: Xavier-uniform weights, zero biases, unit
    /// norm gains, and embeddings uniform in `±sqrt(3/d)` (unit variance
    /// after the `sqrt(d)` input scaling). The output projection is a
    /// separate tensor that starts as the transpose of the output class's
    /// embedding table, so a copied input embedding scores its own token.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        cfg.validate()?;
        let d = cfg.d_model;
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        let mut add = |name: String, t: Tensor| {
            names.push(name);
            tensors.push(t);
        };
        let uniform = |rows: usize, cols: usize, bound: f64, rng: &mut R| {
            let v = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
            Tensor::matrix(rows, cols, v).expect("positive dims")
        };
        let xavier = |r: usize, c: usize| (6.0 / (r + c) as f64).sqrt();
        let emb_bound = (3.0 / d as f64).sqrt();

        let mut out_emb = None;
        for c in cfg.layout.embedded_classes() {
            let t = uniform(cfg.vocab(c), d, emb_bound, rng);
            if c == cfg.layout.out {
                out_emb = Some(t.clone());
            }
            add(format!("emb.{}", class_key(c)), t);
        }
        let norm = |add: &mut dyn FnMut(String, Tensor), p: &str| {
            add(format!("{p}.g"), Tensor::matrix(1, d, vec![1.0; d]).expect("dims"));
            add(format!("{p}.b"), Tensor::zeros(1, d));
        };
        let stacks = [
            ("sem", cfg.n_layers_enc_sem, false),
            ("syn", cfg.n_layers_enc_syn, false),
            ("dec", cfg.n_layers_dec, true),
        ];
        for (stack, n, is_dec) in stacks {
            for l in 0..n {
                let p = format!("{stack}.{l}");
                let attns: &[&str] = if is_dec { &["self", "cross"] } else { &["self"] };
                for a in attns {
                    for w in ["q", "k", "v", "o"] {
                        add(format!("{p}.{a}.w{w}"), uniform(d, d, xavier(d, d), rng));
                        // a key bias only shifts each score row by a constant
                        if w != "k" {
                            add(format!("{p}.{a}.b{w}"), Tensor::zeros(1, d));
                        }
                    }
                }
                let norms = if is_dec { 3 } else { 2 };
                for k in 1..=norms {
                    norm(&mut add, &format!("{p}.ln{k}"));
                }
                add(format!("{p}.ff.w1"), uniform(d, cfg.d_ffn, xavier(d, cfg.d_ffn), rng));
                add(format!("{p}.ff.b1"), Tensor::zeros(1, cfg.d_ffn));
                add(format!("{p}.ff.w2"), uniform(cfg.d_ffn, d, xavier(d, cfg.d_ffn), rng));
                add(format!("{p}.ff.b2"), Tensor::zeros(1, d));
            }
            norm(&mut add, &format!("{stack}.ln_final"));
        }
        add("dec.segment".into(), uniform(2, d, emb_bound, rng));
        let v = cfg.vocab(cfg.layout.out);
        let emb = out_emb.expect("output class is embedded");
        let mut out_w = vec![0.0; d * v];
        for (tok, row) in emb.values().chunks(d).enumerate() {
            for (j, x) in row.iter().enumerate() {
                out_w[j * v + tok] = *x;
            }
        }
        add("out.w".into(), Tensor::matrix(d, v, out_w).expect("dims"));
        add("out.b".into(), Tensor::zeros(1, v));

        let params = Self::from_parts(names, tensors)?;
        debug_assert_eq!(params.scalar_count(), cfg.param_count());
        Ok(params)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, ModelError> {
        self.index
            .get(name)
            .map(|&i| &self.tensors[i])
            .ok_or_else(|| ModelError::MissingParam(name.into()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, ModelError> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.tensors[i]),
            None => Err(ModelError::MissingParam(name.into())),
        }
    }

    /// Checks that names and shapes are exactly those `cfg` would create.
    pub fn check_against(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(0);
        let reference = Self::init(cfg, &mut rng)?;
        if reference.names != self.names {
            return Err(ModelError::Config("parameter names differ from config".into()));
        }
        for (n, (a, b)) in self.names.iter().zip(reference.tensors.iter().zip(&self.tensors)) {
            if a.shape() != b.shape() {
                return Err(ModelError::Config(format!("shape of '{n}' differs from config")));
            }
        }
        Ok(())
    }

    /// Records every tensor as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Bound<'_>, ModelError> {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.zero_grad();
                t.set_requires_grad(trainable);
                tape.leaf(t)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Bound { params: self, vars })
    }

    /// Moves gradients from a bound tape into the parameters' own buffers.
    pub fn collect_grads(&mut self, tape: &mut Tape, vars: &[Var]) {
        for (t, &v) in self.tensors.iter_mut().zip(vars) {
            if let Some(g) = tape.take_grad(v) {
                t.accumulate_grad(&g);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }
}


/// Parameters bound to tape leaves.
#[derive(Clone, Debug)]
pub struct Bound<'p> {
    params: &'p Params,
    vars: Vec<Var>,
}

impl<'p> Bound<'p> {
    /// Pairs tape variables, in parameter order, with their names.
    pub fn from_vars(params: &'p Params, vars: Vec<Var>) -> Result<Self, ModelError> {
        if vars.len() != params.tensors.len() {
            return Err(ModelError::Config(format!(
                "{} variables for {} parameters",
                vars.len(),
                params.tensors.len()
            )));
        }
        Ok(Self { params, vars })
    }

    pub fn var(&self, name: &str) -> Result<Var, ModelError> {
        self.params
            .index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| ModelError::MissingParam(name.into()))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn params(&self) -> &Params {
        self.params
    }
}

/// Which encoder stack a sequence went through.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Semantic,
    Syntactic,
}

impl Provenance {
    pub(crate) fn prefix(self) -> &'static str {
        match self {
            Provenance::Semantic => "sem",
            Provenance::Syntactic => "syn",
        }
    }
}

/// Encoder output detached from any tape. An empty input has no matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSequence {
    pub values: Option<Tensor>,
    pub provenance: Provenance,
}

impl EmbeddingSequence {
    pub fn len(&self) -> usize {
        self.values.as_ref().map_or(0, Tensor::rows)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_none()
    }
}

/// Runs one encoder stack on `ids` and returns the detached output.
pub fn encoder_forward(
    params: &Params,
    cfg: &ModelConfig,
    stack: Provenance,
    ids: &[usize],
    use_positions: bool,
) -> Result<EmbeddingSequence, ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false)?;
    let out = encode(&mut tape, &bound, cfg, stack, ids, use_positions)?;
    Ok(EmbeddingSequence {
        values: out.map(|v| tape.value(v).clone()),
        provenance: stack,
    })
}

/// Teacher-forced decoder logits (`steps × vocab`) for `inputs` (which
/// start with BOS) against two detached memories.
pub fn decoder_forward(
    params: &Params,
    cfg: &ModelConfig,
    inputs: &[usize],
    memory_sem: &EmbeddingSequence,
    memory_syn: &EmbeddingSequence,
) -> Result<Tensor, ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false)?;
    let mut to_var = |m: &EmbeddingSequence| -> Result<Option<Var>, ModelError> {
        match &m.values {
            None => Ok(None),
            Some(t) if t.cols() != cfg.d_model => Err(ModelError::Width {
                expected: cfg.d_model,
                got: t.cols(),
            }),
            Some(t) => Ok(Some(tape.constant(t.clone())?)),
        }
    };
    let memory = Memory {
        sem: to_var(memory_sem)?,
        syn: to_var(memory_syn)?,
    };
    let logits = decode_logits(&mut tape, &bound, cfg, inputs, &memory)?;
    Ok(tape.value(logits).clone())
}

#[cfg(test)]
mod tests;
