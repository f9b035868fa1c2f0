//! Embeddings, the LSTM cell and sequence runners, the mapping MLP, and
//! Luong-style general attention.
//!
//! Each block has a `declare` function that adds zero-filled parameters to a
//! store under a name prefix, and a `bind` function that pulls them onto a
//! tape for one forward pass.

use crate::data::{Padded, BOS};
use crate::error::{Error, Result};
use crate::nn::{ParamStore, Real, Tape, Tensor, Var};

fn declare<T: Real>(store: &mut ParamStore<T>, name: String, shape: &[usize]) -> Result<()> {
    store.insert(name, Tensor::zeros(shape))
}

/// `V×E` lookup table.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: Var,
}

impl Embedding {
    pub fn declare<T: Real>(store: &mut ParamStore<T>, name: &str, vocab: usize, dim: usize) -> Result<()> {
        declare(store, name.to_string(), &[vocab, dim])
    }

    pub fn bind<T: Real>(g: &mut Tape<T>, store: &ParamStore<T>, name: &str) -> Result<Self> {
        Ok(Self {
            table: g.param(store, name)?,
        })
    }

    pub fn lookup<T: Real>(&self, g: &mut Tape<T>, ids: &[usize]) -> Result<Var> {
        g.gather_rows(self.table, ids)
    }
}

/// Affine map `x·W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: Var,
    pub b: Var,
}

impl Linear {
    pub fn declare<T: Real>(store: &mut ParamStore<T>, prefix: &str, input: usize, output: usize) -> Result<()> {
        declare(store, format!("{prefix}.W"), &[input, output])?;
        declare(store, format!("{prefix}.b"), &[output])
    }

    pub fn bind<T: Real>(g: &mut Tape<T>, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        Ok(Self {
            w: g.param(store, &format!("{prefix}.W"))?,
            b: g.param(store, &format!("{prefix}.b"))?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Tape<T>, x: Var) -> Result<Var> {
        let xw = g.matmul(x, self.w)?;
        g.add_bias(xw, self.b)
    }
}

/// LSTM cell with input weights `W_ih (E×4H)`, recurrent weights `W_hh (H×4H)`
/// and bias `b (4H)`. Gate blocks are laid out as `[input, forget, candidate, output]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_ih: Var,
    pub w_hh: Var,
    pub b: Var,
    pub hidden: usize,
}

impl LstmCell {
    pub fn declare<T: Real>(store: &mut ParamStore<T>, prefix: &str, input: usize, hidden: usize) -> Result<()> {
        declare(store, format!("{prefix}.W_ih"), &[input, 4 * hidden])?;
        declare(store, format!("{prefix}.W_hh"), &[hidden, 4 * hidden])?;
        declare(store, format!("{prefix}.b"), &[4 * hidden])
    }

    pub fn bind<T: Real>(g: &mut Tape<T>, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let w_hh = g.param(store, &format!("{prefix}.W_hh"))?;
        let hidden = g.value(w_hh).shape()[0];
        Ok(Self {
            w_ih: g.param(store, &format!("{prefix}.W_ih"))?,
            w_hh,
            b: g.param(store, &format!("{prefix}.b"))?,
            hidden,
        })
    }

    /// One step: returns `(h_t, c_t)`.
    pub fn step<T: Real>(&self, g: &mut Tape<T>, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let batch = g.value(x).dims2().0;
        for v in [h_prev, c_prev] {
            if g.value(v).shape() != [batch, self.hidden] {
                return Err(Error::Shape {
                    op: "lstm_cell_step",
                    lhs: vec![batch, self.hidden],
                    rhs: g.value(v).shape().to_vec(),
                });
            }
        }
        let h = self.hidden;
        let xw = g.matmul(x, self.w_ih)?;
        let hu = g.matmul(h_prev, self.w_hh)?;
        let pre = g.add(xw, hu)?;
        let z = g.add_bias(pre, self.b)?;

        let zi = g.slice_cols(z, 0, h)?;
        let zf = g.slice_cols(z, h, h)?;
        let zg = g.slice_cols(z, 2 * h, h)?;
        let zo = g.slice_cols(z, 3 * h, h)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let cand = g.tanh(zg);
        let o = g.sigmoid(zo);

        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h_t = g.mul(o, tc)?;
        Ok((h_t, c))
    }
}

/// Output of [`encode_sequence`].
#[derive(Debug, Clone)]
pub struct Encoded {
    /// Hidden state after every position, each `B×H`. Rows past a sequence's
    /// end hold its final state.
    pub states: Vec<Var>,
    pub final_h: Var,
    pub final_c: Var,
    /// `[h_T ; c_T]`, `B×2H`.
    pub semantic: Var,
}

pub fn zero_state<T: Real>(g: &mut Tape<T>, batch: usize, hidden: usize) -> Var {
    g.constant(Tensor::zeros(&[batch, hidden]))
}

/// Runs the cell left to right from a zero state. The state of each row stops
/// updating after its last unmasked position.
pub fn encode_sequence<T: Real>(g: &mut Tape<T>, emb: &Embedding, cell: &LstmCell, tokens: &Padded) -> Result<Encoded> {
    let b = tokens.batch_size();
    let mut h = zero_state(g, b, cell.hidden);
    let mut c = zero_state(g, b, cell.hidden);
    let mut states = Vec::with_capacity(tokens.width());
    for t in 0..tokens.width() {
        let x = emb.lookup(g, &tokens.column(t))?;
        let (h_new, c_new) = cell.step(g, x, h, c)?;
        let live = tokens.mask_column(t);
        if live.iter().all(|&k| k) {
            h = h_new;
            c = c_new;
        } else {
            h = g.blend_rows(h_new, h, &live)?;
            c = g.blend_rows(c_new, c, &live)?;
        }
        states.push(h);
    }
    let semantic = g.concat_cols(&[h, c])?;
    Ok(Encoded {
        states,
        final_h: h,
        final_c: c,
        semantic,
    })
}

/// Splits a `B×2H` semantic state into `(h, c)`.
pub fn split_state<T: Real>(g: &mut Tape<T>, state: Var, hidden: usize) -> Result<(Var, Var)> {
    let (_, w) = g.value(state).dims2();
    if w != 2 * hidden {
        return Err(Error::Shape {
            op: "split_state",
            lhs: vec![2 * hidden],
            rhs: vec![w],
        });
    }
    Ok((g.slice_cols(state, 0, hidden)?, g.slice_cols(state, hidden, hidden)?))
}

/// The mapping `g(·)`: `2H → 2H` with one tanh hidden layer of width `2H`
/// and a linear output.
#[derive(Debug, Clone, Copy)]
pub struct MappingMlp {
    pub hidden: Linear,
    pub out: Linear,
}

impl MappingMlp {
    pub fn declare<T: Real>(store: &mut ParamStore<T>, prefix: &str, dim: usize) -> Result<()> {
        Linear::declare(store, &format!("{prefix}.l1"), dim, dim)?;
        Linear::declare(store, &format!("{prefix}.l2"), dim, dim)
    }

    pub fn bind<T: Real>(g: &mut Tape<T>, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        Ok(Self {
            hidden: Linear::bind(g, store, &format!("{prefix}.l1"))?,
            out: Linear::bind(g, store, &format!("{prefix}.l2"))?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Tape<T>, h: Var) -> Result<Var> {
        let pre = self.hidden.forward(g, h)?;
        let a = g.tanh(pre);
        self.out.forward(g, a)
    }
}

/// General-score attention: `score_t = h·W_a·enc_t`, and the attentional
/// state `h̃ = tanh([context ; h]·W_c)`.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub w_a: Var,
    pub w_c: Var,
}

impl Attention {
    pub fn declare<T: Real>(store: &mut ParamStore<T>, prefix: &str, hidden: usize) -> Result<()> {
        declare(store, format!("{prefix}.W_a"), &[hidden, hidden])?;
        declare(store, format!("{prefix}.W_c"), &[2 * hidden, hidden])
    }

    pub fn bind<T: Real>(g: &mut Tape<T>, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        Ok(Self {
            w_a: g.param(store, &format!("{prefix}.W_a"))?,
            w_c: g.param(store, &format!("{prefix}.W_c"))?,
        })
    }

    /// Returns `(context B×H, weights B×T)`. `mask` is row-major `B×T`.
    pub fn context<T: Real>(&self, g: &mut Tape<T>, decoder_h: Var, encoder_states: &[Var], mask: &[bool]) -> Result<(Var, Var)> {
        if encoder_states.is_empty() {
            return Err(Error::Invalid("attention over an empty source".into()));
        }
        let q = g.matmul(decoder_h, self.w_a)?;
        let scores = encoder_states
            .iter()
            .map(|&e| g.row_dot(q, e))
            .collect::<Result<Vec<_>>>()?;
        let scores = g.concat_cols(&scores)?;
        let weights = g.masked_softmax(scores, mask)?;
        let mut context = None;
        for (t, &e) in encoder_states.iter().enumerate() {
            let w = g.slice_cols(weights, t, 1)?;
            let term = g.scale_rows(e, w)?;
            context = Some(match context {
                None => term,
                Some(acc) => g.add(acc, term)?,
            });
        }
        Ok((context.expect("non-empty"), weights))
    }

    pub fn attentional_hidden<T: Real>(&self, g: &mut Tape<T>, context: Var, decoder_h: Var) -> Result<Var> {
        let joined = g.concat_cols(&[context, decoder_h])?;
        let pre = g.matmul(joined, self.w_c)?;
        Ok(g.tanh(pre))
    }
}

/// Source annotations the attention layer reads from.
#[derive(Debug, Clone, Copy)]
pub struct AttentionInput<'a> {
    pub attention: &'a Attention,
    pub states: &'a [Var],
    /// Row-major `B×T` source mask.
    pub mask: &'a [bool],
}

/// The pieces a decoder step needs.
#[derive(Debug, Clone, Copy)]
pub struct Decoder<'a> {
    pub embedding: &'a Embedding,
    pub cell: &'a LstmCell,
    pub projection: &'a Linear,
    pub attention: Option<AttentionInput<'a>>,
}

impl Decoder<'_> {
    /// Feeds `inputs`, advances the state, and returns `(h, c, logits)`.
    pub fn step<T: Real>(&self, g: &mut Tape<T>, inputs: &[usize], h: Var, c: Var) -> Result<(Var, Var, Var)> {
        let x = self.embedding.lookup(g, inputs)?;
        let (h, c) = self.cell.step(g, x, h, c)?;
        let top = match self.attention {
            Some(a) => {
                let (ctx, _) = a.attention.context(g, h, a.states, a.mask)?;
                a.attention.attentional_hidden(g, ctx, h)?
            }
            None => h,
        };
        let logits = self.projection.forward(g, top)?;
        Ok((h, c, logits))
    }

    /// Teacher-forced pass over `targets`: the input at step `t` is the gold
    /// token `t-1` (BOS at step 0). Returns one `B×V` logits matrix per step.
    pub fn teacher_forced<T: Real>(&self, g: &mut Tape<T>, init: Var, targets: &Padded) -> Result<Vec<Var>> {
        let b = targets.batch_size();
        let (mut h, mut c) = split_state(g, init, self.cell.hidden)?;
        if g.value(h).dims2().0 != b {
            return Err(Error::Shape {
                op: "decode_teacher_forced",
                lhs: vec![b],
                rhs: g.value(init).shape().to_vec(),
            });
        }
        let mut logits = Vec::with_capacity(targets.width());
        let mut prev = vec![BOS; b];
        for t in 0..targets.width() {
            let (h2, c2, l) = self.step(g, &prev, h, c)?;
            h = h2;
            c = c2;
            logits.push(l);
            prev = targets.column(t);
        }
        Ok(logits)
    }

    /// Masked cross-entropy of teacher-forced logits against `targets`.
    pub fn loss<T: Real>(&self, g: &mut Tape<T>, init: Var, targets: &Padded) -> Result<crate::nn::XentLoss> {
        let logits = self.teacher_forced(g, init, targets)?;
        sequence_xent(g, &logits, targets)
    }
}

/// Sums per-step masked cross-entropy into one scalar.
pub fn sequence_xent<T: Real>(g: &mut Tape<T>, logits: &[Var], targets: &Padded) -> Result<crate::nn::XentLoss> {
    let mut total: Option<Var> = None;
    let mut tokens = 0;
    for (t, &l) in logits.iter().enumerate() {
        let step = g.softmax_cross_entropy(l, &targets.column(t), &targets.mask_column(t))?;
        tokens += step.tokens;
        total = Some(match total {
            None => step.sum,
            Some(acc) => g.add(acc, step.sum)?,
        });
    }
    let sum = total.ok_or_else(|| Error::Invalid("empty target sequence".into()))?;
    Ok(crate::nn::XentLoss { sum, tokens })
}
