use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{invalid, Result};

pub const MAX_ORDER: usize = 4;

/// Corpus BLEU with pooled clipped n-gram counts and no smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// `bleu[n-1]` is BLEU-n on a 0–100 scale, for `n ≤ max_n`.
    pub bleu: [f64; MAX_ORDER],
    /// Pooled modified precision per order.
    pub precisions: [f64; MAX_ORDER],
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub max_n: usize,
}

impl BleuReport {
    pub fn bleu(&self, n: usize) -> f64 {
        self.bleu[n - 1]
    }
}

fn ngram_counts<S: Eq + Hash>(tokens: &[S], n: usize) -> HashMap<&[S], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped matches and hypothesis n-gram count of one pair at order `n`.
pub fn clipped_counts<S: Eq + Hash>(hyp: &[S], reference: &[S], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matched = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

/// `exp(1 − r/c)` when `c ≤ r`, else 1. An empty hypothesis side gives 0.
pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// `100 · BP · exp(mean of ln p_k for k ≤ n)`, or 0 when any `p_k` is 0.
pub fn combine(precisions: &[f64], bp: f64) -> f64 {
    if precisions.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / precisions.len() as f64;
    100.0 * bp * log_mean.exp()
}

/// Corpus-level BLEU-1..`max_n` with one reference per hypothesis.
pub fn corpus_bleu<S, H, R>(hypotheses: &[H], references: &[R], max_n: usize) -> Result<BleuReport>
where
    S: Eq + Hash,
    H: AsRef<[S]>,
    R: AsRef<[S]>,
{
    if hypotheses.len() != references.len() {
        return invalid(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        ));
    }
    if hypotheses.is_empty() {
        return invalid("BLEU over an empty corpus");
    }
    if !(1..=MAX_ORDER).contains(&max_n) {
        return invalid(format!("max_n must be in 1..={MAX_ORDER}"));
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let (m, t) = clipped_counts(h, r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for k in 0..max_n {
        if totals[k] > 0 {
            precisions[k] = matches[k] as f64 / totals[k] as f64;
        }
    }
    let bp = brevity_penalty(hyp_len, ref_len);
    let mut bleu = [0.0; MAX_ORDER];
    for n in 1..=max_n {
        bleu[n - 1] = combine(&precisions[..n], bp);
    }
    Ok(BleuReport {
        bleu,
        precisions,
        matches,
        totals,
        brevity_penalty: bp,
        hyp_len,
        ref_len,
        max_n,
    })
}

/// Sentence-level BLEU-n with add-one smoothing on orders ≥ 2, for
/// cross-checking individual responses.
pub fn sentence_bleu_smoothed<S: Eq + Hash>(hyp: &[S], reference: &[S], n: usize) -> f64 {
    let precisions: Vec<f64> = (1..=n)
        .map(|k| {
            let (m, t) = clipped_counts(hyp, reference, k);
            if k == 1 {
                if t == 0 {
                    0.0
                } else {
                    m as f64 / t as f64
                }
            } else {
                (m + 1) as f64 / (t + 1) as f64
            }
        })
        .collect();
    combine(&precisions, brevity_penalty(hyp.len(), reference.len()))
}
