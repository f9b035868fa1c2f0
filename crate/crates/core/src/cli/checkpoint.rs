//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      b"AEM1"
//! version    u32 (= 1)
//! kind       u8  (model kind tag)
//! config     u32 length + UTF-8 key=value text (hyperparameters and trainer state)
//! vocab      u32 count, then per entry u32 length + UTF-8 token
//! arrays     u32 count, then per array:
//!              u32 length + UTF-8 name, u32 ndims, ndims × u64 dims,
//!              product(dims) × f32
//! checksum   u32 CRC-32 of every preceding byte
//! ```
//!
//! Optimizer moments are stored as arrays named `adam.m/<param>` and
//! `adam.v/<param>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::cli::config::RunConfig;
use crate::data::{Vocabulary, NUM_SPECIAL, SPECIAL_TOKENS};
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind, ModelSpec, TrainerState};
use crate::nn::{AdamState, ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"AEM1";
pub const VERSION: u32 = 1;

const ADAM_M: &str = "adam.m/";
const ADAM_V: &str = "adam.v/";

/// Everything needed to generate from, or keep training, a model.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Hyperparameters; data paths are not stored.
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub model: Model<f32>,
    pub adam: Option<AdamState<f32>>,
    pub state: TrainerState,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Model spec implied by a run config and a vocabulary.
pub fn model_spec(cfg: &RunConfig, vocab: &Vocabulary) -> ModelSpec {
    ModelSpec {
        mapping: cfg.mapping,
        ..ModelSpec::from_config(cfg.kind, &cfg.train, vocab.len())
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| bad(format!("{v} does not fit in u32")))?;
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    fn array(&mut self, name: &str, shape: &[usize], values: &[f32]) -> Result<()> {
        self.str(name)?;
        self.u32(shape.len())?;
        for &d in shape {
            self.buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| bad(format!("truncated file while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let b = self.take(8, what)?;
        usize::try_from(u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .map_err(|_| bad(format!("{what} too large")))
    }

    fn str(&mut self, what: &str) -> Result<&'a str> {
        let n = self.u32(what)?;
        std::str::from_utf8(self.take(n, what)?).map_err(|_| bad(format!("{what} is not UTF-8")))
    }

    fn array(&mut self) -> Result<(String, Tensor<f32>)> {
        let name = self.str("array name")?.to_string();
        let ndims = self.u32("array rank")?;
        let mut shape = Vec::with_capacity(ndims.min(8));
        for _ in 0..ndims {
            shape.push(self.u64("array dims")?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| bad(format!("array `{name}` is too large")))?;
        let raw = self.take(numel, "array values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(shape, values).map_err(|e| bad(format!("array `{name}`: {e}")))?;
        Ok((name, t))
    }
}

fn config_text(ck: &Checkpoint) -> String {
    let mut s = ck.config.hyper_text();
    let st = &ck.state;
    s.push_str(&format!("state.epoch={}\n", st.epoch));
    s.push_str(&format!("state.step={}\n", st.step));
    match st.best_val {
        Some(v) => s.push_str(&format!("state.best_val={v}\n")),
        None => s.push_str("state.best_val=none\n"),
    }
    s.push_str(&format!("state.bad_epochs={}\n", st.bad_epochs));
    if let Some(a) = &ck.adam {
        s.push_str(&format!("adam.step={}\n", a.step_count()));
    }
    s
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.buf.extend_from_slice(&VERSION.to_le_bytes());
        w.buf.push(self.model.kind().tag());
        w.str(&config_text(self))?;
        w.u32(self.vocab.len())?;
        for t in self.vocab.tokens() {
            w.str(t)?;
        }
        let mut arrays: Vec<(String, Vec<usize>, &[f32])> = self
            .model
            .params
            .iter()
            .map(|(n, t)| (n.to_string(), t.shape().to_vec(), t.values()))
            .collect();
        if let Some(a) = &self.adam {
            for (name, m, v) in a.iter_moments() {
                let shape = self
                    .model
                    .params
                    .get(name)
                    .ok_or_else(|| bad(format!("optimizer state for unknown parameter `{name}`")))?
                    .shape()
                    .to_vec();
                arrays.push((format!("{ADAM_M}{name}"), shape.clone(), m));
                arrays.push((format!("{ADAM_V}{name}"), shape, v));
            }
        }
        w.u32(arrays.len())?;
        for (name, shape, values) in &arrays {
            w.array(name, shape, values)?;
        }
        let crc = crc32fast::hash(&w.buf);
        w.buf.extend_from_slice(&crc.to_le_bytes());
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(bad("bad magic (not a checkpoint file)"));
        }
        if bytes.len() < 13 {
            return Err(bad("truncated file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version} (expected {VERSION})")));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(bad("checksum mismatch (file is corrupt or truncated)"));
        }

        let mut r = Reader { buf: body, pos: 8 };
        let tag = r.take(1, "kind tag")?[0];
        let kind = ModelKind::from_tag(tag).ok_or_else(|| bad(format!("unknown model kind tag {tag}")))?;
        let text = r.str("config")?;

        let mut hyper = String::new();
        let mut state = TrainerState::default();
        let mut adam_step: Option<u64> = None;
        for line in text.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad config line `{line}`")))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("bad value for `{k}`")));
            match k {
                "state.epoch" => state.epoch = num(v)?,
                "state.step" => state.step = num(v)?,
                "state.bad_epochs" => state.bad_epochs = num(v)? as usize,
                "state.best_val" => {
                    state.best_val = match v {
                        "none" => None,
                        _ => Some(v.parse().map_err(|_| bad("bad value for `state.best_val`"))?),
                    }
                }
                "adam.step" => adam_step = Some(num(v)?),
                _ => {
                    hyper.push_str(line);
                    hyper.push('\n');
                }
            }
        }
        let config = RunConfig::from_text(&hyper, Path::new("<checkpoint>"), Path::new(""))?;
        if config.kind != kind {
            return Err(bad(format!("kind tag `{kind}` disagrees with config `{}`", config.kind)));
        }

        let n_vocab = r.u32("vocab count")?;
        let mut tokens = Vec::with_capacity(n_vocab.min(1 << 20));
        for _ in 0..n_vocab {
            tokens.push(r.str("vocab entry")?.to_string());
        }
        if tokens.len() < NUM_SPECIAL || tokens[..NUM_SPECIAL] != SPECIAL_TOKENS {
            return Err(bad("vocabulary does not start with the reserved tokens"));
        }
        let vocab = Vocabulary::from_tokens(tokens.into_iter().skip(NUM_SPECIAL))?;

        let n_arrays = r.u32("array count")?;
        let mut params = ParamStore::new();
        let mut m_moments = BTreeMap::new();
        let mut v_moments = BTreeMap::new();
        for _ in 0..n_arrays {
            let (name, t) = r.array()?;
            if let Some(p) = name.strip_prefix(ADAM_M) {
                m_moments.insert(p.to_string(), t.values().to_vec());
            } else if let Some(p) = name.strip_prefix(ADAM_V) {
                v_moments.insert(p.to_string(), t.values().to_vec());
            } else {
                params.insert(name, t)?;
            }
        }
        if r.pos != body.len() {
            return Err(bad(format!("{} trailing bytes", body.len() - r.pos)));
        }

        let model = Model::from_params(model_spec(&config, &vocab), params)
            .map_err(|e| bad(format!("parameters do not match the config: {e}")))?;
        let adam = match adam_step {
            None => None,
            Some(step) => {
                let mut moments = BTreeMap::new();
                for (name, m) in m_moments {
                    let v = v_moments
                        .remove(&name)
                        .ok_or_else(|| bad(format!("missing second moment for `{name}`")))?;
                    moments.insert(name, (m, v));
                }
                Some(AdamState::restore(config.train.adam(), step, moments))
            }
        };
        Ok(Self {
            config,
            vocab,
            model,
            adam,
            state,
        })
    }

    /// Writes through a temporary file and a rename, so an interrupted save
    /// leaves the previous checkpoint intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("ckpt.tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
