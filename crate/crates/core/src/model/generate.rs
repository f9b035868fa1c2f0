use crate::data::{Padded, BOS, EOS, PAD};
use crate::error::{invalid, Result};
use crate::layers::{split_state, Attention, AttentionInput, Decoder, Embedding, Linear, LstmCell};
use crate::model::{Model, Role, ATTN, SRC_DEC, SRC_EMBED, SRC_OUT};
use crate::nn::{Real, Tape, Var};

/// Index of the largest logit among emittable tokens; ties go to the lowest id.
fn greedy_pick<T: Real>(logits: &[T]) -> usize {
    let mut best = EOS;
    for (id, &v) in logits.iter().enumerate() {
        if id == PAD || id == BOS {
            continue;
        }
        if v > logits[best] {
            best = id;
        }
    }
    best
}

impl<T: Real> Model<T> {
    /// Greedy response for one source sequence: encode `x` to `h`, map to `t`
    /// (AEM kinds) and decode from `t` until EOS or `max_len` tokens. The
    /// target-encoder is never used. Attention kinds attend over the
    /// source-encoder states at every step.
    pub fn generate(&self, source: &[usize], max_len: usize) -> Result<Vec<usize>> {
        Ok(self.generate_batch(&[source.to_vec()], max_len)?.remove(0))
    }

    /// Like [`Model::generate`], but refuses models without attention parameters.
    pub fn generate_with_attention(&self, source: &[usize], max_len: usize) -> Result<Vec<usize>> {
        if !self.kind().has_attention() {
            return invalid(format!("`{}` has no attention parameters", self.kind()));
        }
        self.generate(source, max_len)
    }

    /// Greedy decoding of several sources at once. Rows are independent, so
    /// the result equals decoding each source alone.
    pub fn generate_batch(&self, sources: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>> {
        if sources.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(i) = sources.iter().position(Vec::is_empty) {
            return invalid(format!("source {i} is empty"));
        }
        let refs: Vec<&[usize]> = sources.iter().map(Vec::as_slice).collect();
        let side = Padded::with_eos(&refs, self.spec.max_seq_len)?;
        let b = side.batch_size();

        let mut g = Tape::new();
        let enc = self.encode_source(&mut g, &side)?;
        let init = if self.kind().is_aem() {
            self.map(&mut g, enc.semantic)?
        } else {
            enc.semantic
        };
        let (emb, cell, proj) = self.bind_target_decoder(&mut g)?;
        let attn = if self.kind().has_attention() {
            Some(Attention::bind(&mut g, &self.params, ATTN)?)
        } else {
            None
        };
        let mask = side.mask_flat();
        let dec = Decoder {
            embedding: &emb,
            cell: &cell,
            projection: &proj,
            attention: attn.as_ref().map(|a| AttentionInput {
                attention: a,
                states: &enc.states,
                mask: &mask,
            }),
        };

        greedy_decode(&mut g, &dec, init, self.spec.hidden_size, b, max_len)
    }

    /// Greedy reconstruction by one auto-encoder: the source-decoder from `h`
    /// for [`Role::Source`], the target-decoder from `s` for [`Role::Target`].
    pub fn reconstruct(&self, role: Role, tokens: &[usize], max_len: usize) -> Result<Vec<usize>> {
        if tokens.is_empty() {
            return invalid("cannot reconstruct an empty sequence");
        }
        let side = Padded::with_eos(&[tokens], self.spec.max_seq_len)?;
        let mut g = Tape::new();
        let (init, emb, cell, proj) = match role {
            Role::Source => {
                if !self.kind().is_aem() {
                    return invalid(format!("`{}` has no source-decoder", self.kind()));
                }
                let h = self.encode_source(&mut g, &side)?.semantic;
                (
                    h,
                    Embedding::bind(&mut g, &self.params, SRC_EMBED)?,
                    LstmCell::bind(&mut g, &self.params, SRC_DEC)?,
                    Linear::bind(&mut g, &self.params, SRC_OUT)?,
                )
            }
            Role::Target => {
                let s = self.encode_target(&mut g, &side)?.semantic;
                let (emb, cell, proj) = self.bind_target_decoder(&mut g)?;
                (s, emb, cell, proj)
            }
            Role::Mapped => return invalid("a mapped representation has no auto-encoder"),
        };
        let dec = Decoder {
            embedding: &emb,
            cell: &cell,
            projection: &proj,
            attention: None,
        };
        Ok(greedy_decode(&mut g, &dec, init, self.spec.hidden_size, 1, max_len)?.remove(0))
    }
}

fn greedy_decode<T: Real>(
    g: &mut Tape<T>,
    dec: &Decoder,
    init: Var,
    hidden: usize,
    b: usize,
    max_len: usize,
) -> Result<Vec<Vec<usize>>> {
    let (mut h, mut c) = split_state(g, init, hidden)?;
    let mut prev = vec![BOS; b];
    let mut done = vec![false; b];
    let mut out = vec![Vec::new(); b];
    for _ in 0..max_len {
        let (h2, c2, logits) = dec.step(g, &prev, h, c)?;
        h = h2;
        c = c2;
        let logits = g.value(logits);
        for row in 0..b {
            if done[row] {
                prev[row] = EOS;
                continue;
            }
            let id = greedy_pick(logits.row(row));
            if id == EOS {
                done[row] = true;
            } else {
                out[row].push(id);
            }
            prev[row] = id;
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pick_skips_pad_and_bos_and_breaks_ties_low() {
        assert_eq!(greedy_pick(&[9.0f32, 9.0, 1.0, 1.0, 0.5]), EOS);
        assert_eq!(greedy_pick(&[0.0f32, 0.0, 0.0, 0.0, 0.0]), EOS);
        assert_eq!(greedy_pick(&[0.0f32, 0.0, 0.0, 2.0, 2.0]), 3);
        assert_eq!(greedy_pick(&[0.0f32, 0.0, 0.0, 2.0, 3.0]), 4);
    }
}
