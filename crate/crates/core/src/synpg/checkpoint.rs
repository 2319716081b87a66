//! Binary checkpoint container.
//!
//! Layout (all integers little-endian `u32`, strings length-prefixed UTF-8):
//! magic `SYNPG1`, version, model kind, disentangled flag (`u8`), config
//! block (`key=value` lines), three vocabulary tables (word, parse, tag),
//! named tensors (name, rank, dims, `f32` values), then a SHA-256 digest of
//! every preceding byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::Tensor;
use crate::tokenizer::{TokenTable, Vocab};
use crate::transformer::{Layout, ModelConfig, Params};

use super::{check_vocab_sizes, SynPGModel, SynpgError};

pub const MAGIC: &[u8; 6] = b"SYNPG1";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad magic: not a checkpoint file")]
    Magic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("checksum mismatch: file is corrupt or truncated")]
    Checksum,
    #[error("malformed field '{field}': {message}")]
    Field { field: String, message: String },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    Kind { found: String, expected: String },
    #[error("checkpoint was trained with disentangled={stored}; pass the override flag to run it with disentangled={requested}")]
    Disentangled { stored: bool, requested: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    SynPG,
    ParseGen,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SynPG => "SYNPG",
            ModelKind::ParseGen => "PARSEGEN",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "SYNPG" => Some(ModelKind::SynPG),
            "PARSEGEN" => Some(ModelKind::ParseGen),
            _ => None,
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            ModelKind::SynPG => Layout::SYNPG,
            ModelKind::ParseGen => Layout::PARSEGEN,
        }
    }
}

/// Everything a checkpoint file holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub params: Params,
    pub vocab: Vocab,
    pub disentangled: bool,
}

impl From<&SynPGModel> for Checkpoint {
    fn from(m: &SynPGModel) -> Self {
        Checkpoint {
            kind: ModelKind::SynPG,
            config: m.config.clone(),
            params: m.params.clone(),
            vocab: m.vocab.clone(),
            disentangled: m.disentangled,
        }
    }
}

fn field(name: &str, message: impl Into<String>) -> CheckpointError {
    CheckpointError::Field {
        field: name.into(),
        message: message.into(),
    }
}

const CONFIG_KEYS: [&str; 11] = [
    "d_model",
    "n_heads",
    "n_layers_enc_sem",
    "n_layers_enc_syn",
    "n_layers_dec",
    "d_ffn",
    "max_word_len",
    "max_parse_len",
    "word_vocab",
    "parse_vocab",
    "tag_vocab",
];

fn config_values(c: &ModelConfig) -> [usize; 11] {
    [
        c.d_model,
        c.n_heads,
        c.n_layers_enc_sem,
        c.n_layers_enc_syn,
        c.n_layers_dec,
        c.d_ffn,
        c.max_word_len,
        c.max_parse_len,
        c.word_vocab,
        c.parse_vocab,
        c.tag_vocab,
    ]
}

fn config_text(c: &ModelConfig) -> String {
    CONFIG_KEYS
        .iter()
        .zip(config_values(c))
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

fn parse_config(text: &str, layout: Layout) -> Result<ModelConfig, CheckpointError> {
    let mut vals = [None; 11];
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| field("config", format!("bad line '{line}'")))?;
        let i = CONFIG_KEYS
            .iter()
            .position(|&key| key == k)
            .ok_or_else(|| field("config", format!("unknown key '{k}'")))?;
        vals[i] = Some(v.parse::<usize>().map_err(|e| field(k, e.to_string()))?);
    }
    let get = |i: usize| vals[i].ok_or_else(|| field(CONFIG_KEYS[i], "missing"));
    Ok(ModelConfig {
        d_model: get(0)?,
        n_heads: get(1)?,
        n_layers_enc_sem: get(2)?,
        n_layers_enc_syn: get(3)?,
        n_layers_dec: get(4)?,
        d_ffn: get(5)?,
        max_word_len: get(6)?,
        max_parse_len: get(7)?,
        word_vocab: get(8)?,
        parse_vocab: get(9)?,
        tag_vocab: get(10)?,
        layout,
    })
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("checkpoint field fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| field(what, "unexpected end of data"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn str(&mut self, what: &str) -> Result<String, CheckpointError> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| field(what, "invalid UTF-8"))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION as usize);
        w.str(self.kind.as_str());
        w.0.push(u8::from(self.disentangled));
        w.str(&config_text(&self.config));
        for table in [&self.vocab.words, &self.vocab.parse, &self.vocab.tags] {
            w.u32(table.len());
            table.tokens().iter().for_each(|t| w.str(t));
        }
        w.u32(self.params.len());
        for (name, t) in self.params.names().iter().zip(self.params.tensors()) {
            w.str(name);
            w.u32(t.shape().len());
            t.shape().iter().for_each(|&d| w.u32(d));
            for &v in t.values() {
                w.0.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let digest = Sha256::digest(&w.0);
        w.0.extend_from_slice(&digest);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::Magic);
        }
        let mut r = Reader {
            bytes,
            pos: MAGIC.len(),
        };
        let version = r.u32("version")? as u32;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        if bytes.len() < r.pos + DIGEST_LEN {
            return Err(CheckpointError::Checksum);
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(CheckpointError::Checksum);
        }
        let mut r = Reader { bytes: body, pos: r.pos };

        let kind_s = r.str("kind")?;
        let kind = ModelKind::parse(&kind_s).ok_or_else(|| field("kind", kind_s.clone()))?;
        let disentangled = match r.take(1, "disentangled")?[0] {
            0 => false,
            1 => true,
            b => return Err(field("disentangled", format!("byte {b}"))),
        };
        let config = parse_config(&r.str("config")?, kind.layout())?;
        let mut tables = Vec::with_capacity(3);
        for name in ["vocab.word", "vocab.parse", "vocab.tag"] {
            let n = r.u32(name)?;
            let tokens = (0..n).map(|_| r.str(name)).collect::<Result<Vec<_>, _>>()?;
            tables.push(TokenTable::from_tokens(tokens).map_err(|e| field(name, e.to_string()))?);
        }
        let tags = tables.pop().expect("three tables");
        let parse = tables.pop().expect("three tables");
        let words = tables.pop().expect("three tables");
        let vocab = Vocab::new(words, parse, tags);

        let count = r.u32("tensor count")?;
        let mut names = Vec::with_capacity(count);
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.str("tensor name")?;
            let rank = r.u32(&name)?;
            let shape = (0..rank).map(|_| r.u32(&name)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| field(&name, "too large"))?, &name)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            let t = Tensor::new(shape, values).map_err(|e| field(&name, e.to_string()))?;
            names.push(name);
            tensors.push(t);
        }
        if r.pos != body.len() {
            return Err(field("trailer", "unexpected bytes after tensors"));
        }
        let params = Params::from_parts(names, tensors).map_err(|e| field("tensors", e.to_string()))?;
        params
            .check_against(&config)
            .map_err(|e| field("tensors", e.to_string()))?;
        check_vocab_sizes(&config, &vocab).map_err(|e| field("vocab", e.to_string()))?;
        Ok(Self {
            kind,
            config,
            params,
            vocab,
            disentangled,
        })
    }

    fn expect_kind(&self, expected: ModelKind) -> Result<(), CheckpointError> {
        if self.kind != expected {
            return Err(CheckpointError::Kind {
                found: self.kind.as_str().into(),
                expected: expected.as_str().into(),
            });
        }
        Ok(())
    }

    /// The stored SynPG model, in the mode it was trained in.
    pub fn into_synpg(self) -> Result<SynPGModel, SynpgError> {
        let stored = self.disentangled;
        self.into_synpg_as(stored, false)
    }

    /// The stored SynPG model run with `disentangled`. A mode differing from
    /// the trained one is refused unless `allow_mismatch` is set.
    pub fn into_synpg_as(self, disentangled: bool, allow_mismatch: bool) -> Result<SynPGModel, SynpgError> {
        self.expect_kind(ModelKind::SynPG)?;
        if self.disentangled != disentangled && !allow_mismatch {
            return Err(CheckpointError::Disentangled {
                stored: self.disentangled,
                requested: disentangled,
            }
            .into());
        }
        Ok(SynPGModel {
            config: self.config,
            params: self.params,
            vocab: self.vocab,
            disentangled,
        })
    }

    pub(crate) fn into_parts(self, expected: ModelKind) -> Result<(ModelConfig, Params, Vocab), CheckpointError> {
        self.expect_kind(expected)?;
        Ok((self.config, self.params, self.vocab))
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    write_atomic(path, &checkpoint.to_bytes()).map_err(|e| CheckpointError::Io(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|e| CheckpointError::Io(format!("{}: {e}", path.display())))?;
    Checkpoint::from_bytes(&bytes)
}
