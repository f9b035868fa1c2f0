//! The auto-encoder matching model and its Seq2Seq baselines.
//!
//! Parameter namespaces:
//!
//! | namespace | contents |
//! |-----------|----------|
//! | `theta`   | source auto-encoder: `embed`, `src_enc`, `src_dec`, `src_out` |
//! | `phi`     | target auto-encoder: `embed`, `tgt_enc`, `tgt_dec`, `tgt_out`, plus `attn` for attention kinds |
//! | `gamma`   | mapping MLP `mlp.l1`, `mlp.l2` |
//!
//! Baselines keep only `theta.embed`, `theta.src_enc`, `phi.embed`,
//! `phi.tgt_dec`, `phi.tgt_out` (and `phi.attn`), under the same names, so a
//! baseline and an AEM model initialized with the same seed share the values
//! of every common parameter.

mod config;
mod generate;
mod loss;
mod train;

use std::fmt;
use std::str::FromStr;

pub use config::TrainingConfig;
pub use loss::{total_loss, LossAccumulator, LossBreakdown, LossParts, LossWeights};
pub use train::{evaluate_pairs, train_step, EpochReport, Trainer, TrainerState};

use crate::data::{Batch, Padded};
use crate::error::{invalid, Error, Result};
use crate::layers::{encode_sequence, AttentionInput, Attention, Decoder, Embedding, Encoded, Linear, LstmCell, MappingMlp};
use crate::nn::{uniform_init, ParamStore, Real, Tape, Var, XentLoss};

pub const THETA: &str = "theta";
pub const PHI: &str = "phi";
pub const GAMMA: &str = "gamma";

const SRC_EMBED: &str = "theta.embed";
const SRC_ENC: &str = "theta.src_enc";
const SRC_DEC: &str = "theta.src_dec";
const SRC_OUT: &str = "theta.src_out";
const TGT_EMBED: &str = "phi.embed";
const TGT_ENC: &str = "phi.tgt_enc";
const TGT_DEC: &str = "phi.tgt_dec";
const TGT_OUT: &str = "phi.tgt_out";
const ATTN: &str = "phi.attn";
const MLP: &str = "gamma.mlp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Seq2Seq,
    Seq2SeqAttention,
    Aem,
    AemAttention,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [Self::Seq2Seq, Self::Seq2SeqAttention, Self::Aem, Self::AemAttention];

    pub fn has_attention(self) -> bool {
        matches!(self, Self::Seq2SeqAttention | Self::AemAttention)
    }

    pub fn is_aem(self) -> bool {
        matches!(self, Self::Aem | Self::AemAttention)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Seq2Seq => "seq2seq",
            Self::Seq2SeqAttention => "seq2seq_attention",
            Self::Aem => "aem",
            Self::AemAttention => "aem_attention",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Self::Seq2Seq => 0,
            Self::Seq2SeqAttention => 1,
            Self::Aem => 2,
            Self::AemAttention => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown model kind `{s}`")))
    }
}

/// How `t` is obtained from `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mapping {
    /// The trainable MLP in `gamma`.
    #[default]
    Mlp,
    /// `t = h`, no parameters. Used to compare against the baselines.
    Identity,
}

impl Mapping {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mlp => "mlp",
            Self::Identity => "identity",
        }
    }
}

/// Architecture of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub embed_size: usize,
    pub hidden_size: usize,
    pub mapping: Mapping,
    /// Source truncation length used when encoding for generation.
    pub max_seq_len: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, vocab_size: usize, embed_size: usize, hidden_size: usize) -> Self {
        Self {
            kind,
            vocab_size,
            embed_size,
            hidden_size,
            mapping: Mapping::Mlp,
            max_seq_len: crate::data::MAX_SEQ_LEN,
        }
    }

    pub fn from_config(kind: ModelKind, cfg: &TrainingConfig, vocab_size: usize) -> Self {
        Self {
            max_seq_len: cfg.max_seq_len,
            ..Self::new(kind, vocab_size, cfg.embed_size, cfg.hidden_size)
        }
    }

    /// Dimension of an utterance representation, `2H`.
    pub fn state_dim(&self) -> usize {
        2 * self.hidden_size
    }
}

/// Which representation a [`SemanticState`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// `h`, from the source-encoder.
    Source,
    /// `s`, from the target-encoder.
    Target,
    /// `t = g(h)`.
    Mapped,
}

/// One utterance representation `[h_T ; c_T]` of dimension `2H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticState<T> {
    pub role: Role,
    pub values: Vec<T>,
}

/// Loss variables of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardLosses {
    pub j1: Option<XentLoss>,
    pub j2: Option<XentLoss>,
    pub j3: Option<Var>,
    pub j4: XentLoss,
    /// The weighted objective that training differentiates.
    pub total: Var,
}

impl ForwardLosses {
    /// Reads the values back, rejecting any non-finite term.
    pub fn breakdown<T: Real>(&self, g: &Tape<T>, w: &LossWeights) -> Result<LossBreakdown> {
        let read = |v: Var, term: &'static str| -> Result<f64> {
            let x = g.value(v).item().as_f64();
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::NonFinite { term })
            }
        };
        let xent = |l: Option<XentLoss>, term| -> Result<(f64, f64)> {
            match l {
                None => Ok((0.0, 0.0)),
                Some(l) => {
                    let s = read(l.sum, term)?;
                    Ok((s, s / l.tokens.max(1) as f64))
                }
            }
        };
        let (j1_sum, j1) = xent(self.j1, "j1")?;
        let (j2_sum, j2) = xent(self.j2, "j2")?;
        let (j4_sum, j4) = xent(Some(self.j4), "j4")?;
        let j3 = self.j3.map(|v| read(v, "j3")).transpose()?.unwrap_or(0.0);
        read(self.total, "total")?;
        total_loss(
            &LossParts {
                j1,
                j2,
                j3,
                j4,
                j1_sum,
                j2_sum,
                j4_sum,
            },
            w,
        )
    }
}

/// A model of any [`ModelKind`] together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    pub params: ParamStore<T>,
}

/// Builds one of the comparison systems (`seq2seq` or `seq2seq_attention`).
pub fn build_baseline<T: Real>(kind: ModelKind, vocab_size: usize, embed_size: usize, hidden_size: usize) -> Result<Model<T>> {
    if kind.is_aem() {
        return invalid(format!("`{kind}` is not a baseline kind"));
    }
    Model::new(ModelSpec::new(kind, vocab_size, embed_size, hidden_size))
}

impl<T: Real> Model<T> {
    /// Declares all parameters for `spec`, zero-filled.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let ModelSpec {
            kind,
            vocab_size: v,
            embed_size: e,
            hidden_size: h,
            mapping,
            ..
        } = spec;
        if v == 0 || e == 0 || h == 0 {
            return invalid("model dimensions must be positive");
        }
        let mut p = ParamStore::new();
        Embedding::declare(&mut p, SRC_EMBED, v, e)?;
        LstmCell::declare(&mut p, SRC_ENC, e, h)?;
        Embedding::declare(&mut p, TGT_EMBED, v, e)?;
        LstmCell::declare(&mut p, TGT_DEC, e, h)?;
        Linear::declare(&mut p, TGT_OUT, h, v)?;
        if kind.has_attention() {
            Attention::declare(&mut p, ATTN, h)?;
        }
        if kind.is_aem() {
            LstmCell::declare(&mut p, SRC_DEC, e, h)?;
            Linear::declare(&mut p, SRC_OUT, h, v)?;
            LstmCell::declare(&mut p, TGT_ENC, e, h)?;
            if mapping == Mapping::Mlp {
                MappingMlp::declare(&mut p, MLP, 2 * h)?;
            }
        }
        Ok(Self { spec, params: p })
    }

    /// Declares parameters and fills them uniformly in `[-range, range)`.
    pub fn initialized(spec: ModelSpec, range: f64, seed: u64) -> Result<Self> {
        let mut m = Self::new(spec)?;
        uniform_init(&mut m.params, -range, range, seed)?;
        Ok(m)
    }

    /// Wraps existing parameters, checking that every expected name is present
    /// with the right shape.
    pub fn from_params(spec: ModelSpec, params: ParamStore<T>) -> Result<Self> {
        let template = Self::new(spec)?;
        for (name, t) in template.params.iter() {
            match params.get(name) {
                None => return Err(Error::UnknownParam(name.to_string())),
                Some(p) if p.shape() != t.shape() => {
                    return Err(Error::Shape {
                        op: "from_params",
                        lhs: t.shape().to_vec(),
                        rhs: p.shape().to_vec(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = params.names().find(|n| !template.params.contains(n)) {
            return invalid(format!("unexpected parameter `{extra}` for a {} model", spec.kind));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    fn check_ids(&self, side: &Padded) -> Result<()> {
        let v = self.spec.vocab_size;
        for row in side.rows() {
            if let Some(&bad) = row.iter().find(|&&i| i >= v) {
                return Err(Error::Index {
                    what: "token id",
                    index: bad,
                    size: v,
                });
            }
        }
        Ok(())
    }

    /// Source-encoder over `source`; `semantic` is `h`.
    pub fn encode_source(&self, g: &mut Tape<T>, source: &Padded) -> Result<Encoded> {
        self.check_ids(source)?;
        let emb = Embedding::bind(g, &self.params, SRC_EMBED)?;
        let cell = LstmCell::bind(g, &self.params, SRC_ENC)?;
        encode_sequence(g, &emb, &cell, source)
    }

    /// `h` and the reconstruction loss `J1 = −log P(x̃ | x)` of the source auto-encoder.
    pub fn encode_source_ae(&self, g: &mut Tape<T>, batch: &Batch) -> Result<(Encoded, XentLoss)> {
        self.require_aem("encode_source_ae")?;
        let enc = self.encode_source(g, &batch.source)?;
        let emb = Embedding::bind(g, &self.params, SRC_EMBED)?;
        let cell = LstmCell::bind(g, &self.params, SRC_DEC)?;
        let proj = Linear::bind(g, &self.params, SRC_OUT)?;
        let dec = Decoder {
            embedding: &emb,
            cell: &cell,
            projection: &proj,
            attention: None,
        };
        let j1 = dec.loss(g, enc.semantic, &batch.source)?;
        Ok((enc, j1))
    }

    /// Target-encoder over `target`; `semantic` is `s`.
    pub fn encode_target(&self, g: &mut Tape<T>, target: &Padded) -> Result<Encoded> {
        self.require_aem("encode_target")?;
        self.check_ids(target)?;
        let emb = Embedding::bind(g, &self.params, TGT_EMBED)?;
        let cell = LstmCell::bind(g, &self.params, TGT_ENC)?;
        encode_sequence(g, &emb, &cell, target)
    }

    /// `s` and the reconstruction loss `J2 = −log P(ỹ | y)` of the target auto-encoder.
    pub fn encode_target_ae(&self, g: &mut Tape<T>, batch: &Batch) -> Result<(Var, XentLoss)> {
        let enc = self.encode_target(g, &batch.target)?;
        let dec_parts = self.bind_target_decoder(g)?;
        let dec = Decoder {
            embedding: &dec_parts.0,
            cell: &dec_parts.1,
            projection: &dec_parts.2,
            attention: None,
        };
        let j2 = dec.loss(g, enc.semantic, &batch.target)?;
        Ok((enc.semantic, j2))
    }

    pub(crate) fn bind_target_decoder(&self, g: &mut Tape<T>) -> Result<(Embedding, LstmCell, Linear)> {
        Ok((
            Embedding::bind(g, &self.params, TGT_EMBED)?,
            LstmCell::bind(g, &self.params, TGT_DEC)?,
            Linear::bind(g, &self.params, TGT_OUT)?,
        ))
    }

    fn require_aem(&self, what: &str) -> Result<()> {
        if self.spec.kind.is_aem() {
            Ok(())
        } else {
            invalid(format!("{what} needs an AEM model, this one is `{}`", self.spec.kind))
        }
    }

    /// `t = g(h)`.
    pub fn map(&self, g: &mut Tape<T>, h: Var) -> Result<Var> {
        let dim = g.value(h).dims2().1;
        if dim != self.spec.state_dim() {
            return Err(Error::Shape {
                op: "map_representation",
                lhs: vec![self.spec.state_dim()],
                rhs: vec![dim],
            });
        }
        match self.spec.mapping {
            Mapping::Identity => Ok(h),
            Mapping::Mlp => MappingMlp::bind(g, &self.params, MLP)?.forward(g, h),
        }
    }

    /// Returns `(t, J3)` with `J3 = mean over the batch of ½‖g(h) − s‖²`. When
    /// `detach` is set, `J3` sees copies of `h` and `s`, so its gradient only
    /// reaches `gamma`; the returned `t` is always connected to `h`.
    pub fn map_representation(&self, g: &mut Tape<T>, h: Var, s: Var, detach: bool) -> Result<(Var, Var)> {
        self.require_aem("map_representation")?;
        if g.value(h).shape() != g.value(s).shape() {
            return Err(Error::Shape {
                op: "map_representation",
                lhs: g.value(h).shape().to_vec(),
                rhs: g.value(s).shape().to_vec(),
            });
        }
        let t = self.map(g, h)?;
        let (t_loss, s_loss) = if detach {
            let hd = g.detach(h);
            (self.map(g, hd)?, g.detach(s))
        } else {
            (t, s)
        };
        let diff = g.sub(t_loss, s_loss)?;
        let sq = g.mul(diff, diff)?;
        let sum = g.sum(sq);
        let batch = g.value(h).dims2().0;
        let j3 = g.scale(sum, T::of(0.5 / batch as f64));
        Ok((t, j3))
    }

    fn source_attention_mask(&self, source: &Padded) -> Vec<bool> {
        source.mask_flat()
    }

    /// `J4 = −Σ_t log P(y_t | x, y_<t)`: the target-decoder teacher-forced on
    /// `y` starting from `init` (which is `t` for AEM, `h` for the baselines).
    pub fn end_to_end_loss(&self, g: &mut Tape<T>, batch: &Batch, source: &Encoded, init: Var) -> Result<XentLoss> {
        self.check_ids(&batch.target)?;
        let (emb, cell, proj) = self.bind_target_decoder(g)?;
        let attn = if self.spec.kind.has_attention() {
            Some(Attention::bind(g, &self.params, ATTN)?)
        } else {
            None
        };
        let mask = self.source_attention_mask(&batch.source);
        let dec = Decoder {
            embedding: &emb,
            cell: &cell,
            projection: &proj,
            attention: attn.as_ref().map(|a| AttentionInput {
                attention: a,
                states: &source.states,
                mask: &mask,
            }),
        };
        dec.loss(g, init, &batch.target)
    }

    /// All loss terms for `batch` and their weighted total. Baselines only
    /// produce `J4`.
    pub fn forward(&self, g: &mut Tape<T>, batch: &Batch, w: &LossWeights, detach_j3: bool) -> Result<ForwardLosses> {
        w.validate()?;
        if !self.spec.kind.is_aem() {
            let enc = self.encode_source(g, &batch.source)?;
            let j4 = self.end_to_end_loss(g, batch, &enc, enc.semantic)?;
            let j4_mean = g.scale(j4.sum, T::of(1.0 / j4.tokens as f64));
            let total = g.scale(j4_mean, T::of(w.lambda3));
            return Ok(ForwardLosses {
                j1: None,
                j2: None,
                j3: None,
                j4,
                total,
            });
        }
        let (enc, j1) = self.encode_source_ae(g, batch)?;
        let (s, j2) = self.encode_target_ae(g, batch)?;
        let (t, j3) = self.map_representation(g, enc.semantic, s, detach_j3)?;
        let j4 = self.end_to_end_loss(g, batch, &enc, t)?;

        let mean = |g: &mut Tape<T>, l: XentLoss| g.scale(l.sum, T::of(1.0 / l.tokens as f64));
        let (m1, m2, m4) = (mean(g, j1), mean(g, j2), mean(g, j4));
        let recon = g.add(m1, m2)?;
        let a = g.scale(recon, T::of(w.lambda1));
        let b = g.scale(j3, T::of(w.lambda2));
        let c = g.scale(m4, T::of(w.lambda3));
        let ab = g.add(a, b)?;
        let total = g.add(ab, c)?;
        Ok(ForwardLosses {
            j1: Some(j1),
            j2: Some(j2),
            j3: Some(j3),
            j4,
            total,
        })
    }

    /// Losses on `batch` without updating anything.
    pub fn evaluate(&self, batch: &Batch, w: &LossWeights, detach_j3: bool) -> Result<LossBreakdown> {
        let mut g = Tape::new();
        let f = self.forward(&mut g, batch, w, detach_j3)?;
        f.breakdown(&g, w)
    }

    /// The utterance representation of one token sequence (EOS is appended).
    pub fn represent(&self, role: Role, tokens: &[usize]) -> Result<SemanticState<T>> {
        let side = Padded::with_eos(&[tokens], self.spec.max_seq_len)?;
        let mut g = Tape::new();
        let v = match role {
            Role::Source => self.encode_source(&mut g, &side)?.semantic,
            Role::Target => self.encode_target(&mut g, &side)?.semantic,
            Role::Mapped => {
                self.require_aem("a mapped representation")?;
                let h = self.encode_source(&mut g, &side)?.semantic;
                self.map(&mut g, h)?
            }
        };
        Ok(SemanticState {
            role,
            values: g.value(v).values().to_vec(),
        })
    }
}
