use crate::numerics::{Tape, Tensor, Var};

use super::{class_key, Bound, ModelConfig, ModelError, Provenance, LN_EPS};

/// Additive score for masked attention entries; `exp` of it underflows to 0.
const MASKED: f64 = -1e9;

/// Encoder outputs on a tape; `None` marks an empty sequence.
#[derive(Clone, Copy, Debug)]
pub struct Memory {
    pub sem: Option<Var>,
    pub syn: Option<Var>,
}

/// `n × d` sinusoidal position table.
pub fn sinusoidal_positions(n: usize, d: usize) -> Tensor {
    let mut v = Vec::with_capacity(n * d);
    for pos in 0..n {
        for j in 0..d {
            let rate = 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
            let a = pos as f64 / rate;
            v.push(if j % 2 == 0 { a.sin() } else { a.cos() });
        }
    }
    Tensor::matrix(n, d, v).expect("positive dims")
}

fn norm(tape: &mut Tape, b: &Bound, x: Var, prefix: &str) -> Result<Var, ModelError> {
    let g = b.var(&format!("{prefix}.g"))?;
    let beta = b.var(&format!("{prefix}.b"))?;
    Ok(tape.layer_norm(x, g, beta, LN_EPS)?)
}

fn affine(tape: &mut Tape, b: &Bound, x: Var, w: &str, bias: &str) -> Result<Var, ModelError> {
    let y = tape.matmul(x, b.var(w)?)?;
    Ok(tape.add_row(y, b.var(bias)?)?)
}

fn embed(
    tape: &mut Tape,
    b: &Bound,
    cfg: &ModelConfig,
    class: crate::tokenizer::TokenClass,
    ids: &[usize],
    use_positions: bool,
) -> Result<Var, ModelError> {
    let table = b.var(&format!("emb.{}", class_key(class)))?;
    let x = tape.gather_rows(table, ids)?;
    let x = tape.scale(x, (cfg.d_model as f64).sqrt());
    if !use_positions {
        return Ok(x);
    }
    let pe = tape.constant(sinusoidal_positions(ids.len(), cfg.d_model))?;
    Ok(tape.add(x, pe)?)
}

/// Multi-head attention of `q_in` rows over `kv_in` rows. With `causal`,
/// query `i` sees keys `0..=i` only.
fn attention(
    tape: &mut Tape,
    b: &Bound,
    cfg: &ModelConfig,
    prefix: &str,
    q_in: Var,
    kv_in: Var,
    causal: bool,
) -> Result<Var, ModelError> {
    let p = |s: &str| format!("{prefix}.{s}");
    let q = affine(tape, b, q_in, &p("wq"), &p("bq"))?;
    let k = tape.matmul(kv_in, b.var(&p("wk"))?)?;
    let v = affine(tape, b, kv_in, &p("wv"), &p("bv"))?;
    let (nq, nk) = (tape.value(q).rows(), tape.value(k).rows());
    let mask = if causal {
        let m = (0..nq * nk)
            .map(|i| if i % nk > i / nk { MASKED } else { 0.0 })
            .collect();
        Some(tape.constant(Tensor::matrix(nq, nk, m)?)?)
    } else {
        None
    };
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.n_heads);
    for h in 0..cfg.n_heads {
        let qh = tape.slice_cols(q, h * dh, dh)?;
        let kh = tape.slice_cols(k, h * dh, dh)?;
        let vh = tape.slice_cols(v, h * dh, dh)?;
        let s = tape.matmul_bt(qh, kh)?;
        let mut s = tape.scale(s, scale);
        if let Some(m) = mask {
            s = tape.add(s, m)?;
        }
        let a = tape.softmax_rows(s);
        heads.push(tape.matmul(a, vh)?);
    }
    let cat = tape.concat_cols(&heads)?;
    affine(tape, b, cat, &p("wo"), &p("bo"))
}

fn feed_forward(tape: &mut Tape, b: &Bound, x: Var, prefix: &str) -> Result<Var, ModelError> {
    let h = affine(tape, b, x, &format!("{prefix}.w1"), &format!("{prefix}.b1"))?;
    let h = tape.relu(h);
    affine(tape, b, h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
}

/// Runs one encoder stack. Returns `None` for an empty input.
pub fn encode(
    tape: &mut Tape,
    b: &Bound,
    cfg: &ModelConfig,
    stack: Provenance,
    ids: &[usize],
    use_positions: bool,
) -> Result<Option<Var>, ModelError> {
    let (class, layers) = match stack {
        Provenance::Semantic => (cfg.layout.sem, cfg.n_layers_enc_sem),
        Provenance::Syntactic => (cfg.layout.syn, cfg.n_layers_enc_syn),
    };
    let limit = cfg.limit(class);
    if ids.len() > limit {
        return Err(ModelError::TooLong {
            len: ids.len(),
            limit,
        });
    }
    if ids.is_empty() {
        return Ok(None);
    }
    let name = stack.prefix();
    let mut x = embed(tape, b, cfg, class, ids, use_positions)?;
    for l in 0..layers {
        let p = format!("{name}.{l}");
        let h = norm(tape, b, x, &format!("{p}.ln1"))?;
        let a = attention(tape, b, cfg, &format!("{p}.self"), h, h, false)?;
        x = tape.add(x, a)?;
        let h = norm(tape, b, x, &format!("{p}.ln2"))?;
        let f = feed_forward(tape, b, h, &format!("{p}.ff"))?;
        x = tape.add(x, f)?;
    }
    Ok(Some(norm(tape, b, x, &format!("{name}.ln_final"))?))
}

/// Concatenates the memories along the sequence axis, tagging each row with
/// its segment embedding (row 0 semantic, row 1 syntactic).
fn joint_memory(tape: &mut Tape, b: &Bound, cfg: &ModelConfig, m: &Memory) -> Result<Var, ModelError> {
    let seg = b.var("dec.segment")?;
    let mut parts = Vec::with_capacity(2);
    for (i, part) in [m.sem, m.syn].into_iter().enumerate() {
        let Some(v) = part else { continue };
        let w = tape.value(v).cols();
        if w != cfg.d_model {
            return Err(ModelError::Width {
                expected: cfg.d_model,
                got: w,
            });
        }
        let row = tape.gather_rows(seg, &[i])?;
        parts.push(tape.add_row(v, row)?);
    }
    match parts.len() {
        0 => Err(ModelError::NoMemory),
        1 => Ok(parts[0]),
        _ => Ok(tape.concat_rows(&parts)?),
    }
}

/// Decoder logits, one row per input position. `inputs[0]` should be BOS.
pub fn decode_logits(
    tape: &mut Tape,
    b: &Bound,
    cfg: &ModelConfig,
    inputs: &[usize],
    memory: &Memory,
) -> Result<Var, ModelError> {
    let limit = cfg.limit(cfg.layout.out);
    if inputs.is_empty() || inputs.len() > limit {
        return Err(ModelError::TooLong {
            len: inputs.len(),
            limit,
        });
    }
    let mem = joint_memory(tape, b, cfg, memory)?;
    let mut x = embed(tape, b, cfg, cfg.layout.out, inputs, true)?;
    for l in 0..cfg.n_layers_dec {
        let p = format!("dec.{l}");
        let h = norm(tape, b, x, &format!("{p}.ln1"))?;
        let a = attention(tape, b, cfg, &format!("{p}.self"), h, h, true)?;
        x = tape.add(x, a)?;
        let h = norm(tape, b, x, &format!("{p}.ln2"))?;
        let a = attention(tape, b, cfg, &format!("{p}.cross"), h, mem, false)?;
        x = tape.add(x, a)?;
        let h = norm(tape, b, x, &format!("{p}.ln3"))?;
        let f = feed_forward(tape, b, h, &format!("{p}.ff"))?;
        x = tape.add(x, f)?;
    }
    let x = norm(tape, b, x, "dec.ln_final")?;
    affine(tape, b, x, "out.w", "out.b")
}
