use crate::data::corpus::DialoguePair;
use crate::data::vocab::{EOS, PAD};
use crate::error::{invalid, Result};
use crate::nn::rng::SplitMix64;

/// Default cap on either side of a training pair, before EOS.
pub const MAX_SEQ_LEN: usize = 50;

/// Number of batches whose pairs are sorted together by source length.
const BUCKET_POOL: usize = 16;

/// One side of a batch: `B` rows padded to a common length. The mask is set on
/// real tokens and the terminating EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Padded {
    ids: Vec<Vec<usize>>,
    mask: Vec<Vec<bool>>,
    lengths: Vec<usize>,
}

impl Padded {
    /// Truncates each sequence to `max_len` tokens, appends EOS, and pads to the
    /// longest row.
    pub fn with_eos(seqs: &[&[usize]], max_len: usize) -> Result<Self> {
        let rows: Vec<Vec<usize>> = seqs
            .iter()
            .map(|s| {
                let mut r: Vec<usize> = s.iter().copied().take(max_len).collect();
                r.push(EOS);
                r
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Rows used as given (no EOS appended), padded to the longest.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() {
            return invalid("empty batch");
        }
        if rows.iter().any(Vec::is_empty) {
            return invalid("empty sequence in batch");
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        let lengths: Vec<usize> = rows.iter().map(Vec::len).collect();
        let mut ids = rows;
        let mut mask = Vec::with_capacity(ids.len());
        for (row, &len) in ids.iter_mut().zip(&lengths) {
            row.resize(width, PAD);
            mask.push((0..width).map(|t| t < len).collect());
        }
        Ok(Self { ids, mask, lengths })
    }

    pub fn batch_size(&self) -> usize {
        self.ids.len()
    }

    /// Padded length `T`.
    pub fn width(&self) -> usize {
        self.ids[0].len()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.ids
    }

    pub fn column(&self, t: usize) -> Vec<usize> {
        self.ids.iter().map(|r| r[t]).collect()
    }

    pub fn mask_column(&self, t: usize) -> Vec<bool> {
        self.mask.iter().map(|r| r[t]).collect()
    }

    /// Row-major `B×T` mask.
    pub fn mask_flat(&self) -> Vec<bool> {
        self.mask.concat()
    }

    /// Number of unmasked cells.
    pub fn tokens(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// The same rows padded to `width` (≥ the current width).
    pub fn repad(&self, width: usize) -> Result<Self> {
        if width < self.width() {
            return invalid(format!("cannot repad width {} down to {width}", self.width()));
        }
        let mut out = self.clone();
        for (row, m) in out.ids.iter_mut().zip(&mut out.mask) {
            row.resize(width, PAD);
            m.resize(width, false);
        }
        Ok(out)
    }

    /// Row `b` without padding.
    pub fn unpadded(&self, b: usize) -> &[usize] {
        &self.ids[b][..self.lengths[b]]
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Self::from_rows(rows.iter().map(|&b| self.unpadded(b).to_vec()).collect())
    }
}

/// A mini-batch of dialogue pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub source: Padded,
    pub target: Padded,
}

impl Batch {
    pub fn from_pairs(pairs: &[&DialoguePair], max_len: usize) -> Result<Self> {
        let src: Vec<&[usize]> = pairs.iter().map(|p| p.source.as_slice()).collect();
        let tgt: Vec<&[usize]> = pairs.iter().map(|p| p.target.as_slice()).collect();
        Ok(Self {
            source: Padded::with_eos(&src, max_len)?,
            target: Padded::with_eos(&tgt, max_len)?,
        })
    }

    pub fn len(&self) -> usize {
        self.source.batch_size()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The single-pair batch for row `b`.
    pub fn row(&self, b: usize) -> Result<Self> {
        Ok(Self {
            source: self.source.select(&[b])?,
            target: self.target.select(&[b])?,
        })
    }
}

/// Splits `pairs` into batches for one epoch.
///
/// The pair order is shuffled with a stream derived from `(seed, epoch)`, then
/// pools of consecutive pairs are sorted by source length and cut into
/// batches, and finally the batch order is shuffled.
pub fn make_batches(
    pairs: &[DialoguePair],
    batch_size: usize,
    max_len: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return invalid("batch_size must be at least 1");
    }
    let mut rng = SplitMix64::substream(seed, &format!("batches/{epoch}"));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    rng.shuffle(&mut order);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for pool in order.chunks(batch_size * BUCKET_POOL) {
        let mut pool = pool.to_vec();
        pool.sort_by_key(|&i| pairs[i].source.len().min(max_len));
        groups.extend(pool.chunks(batch_size).map(<[usize]>::to_vec));
    }
    rng.shuffle(&mut groups);

    groups
        .iter()
        .map(|g| {
            let refs: Vec<&DialoguePair> = g.iter().map(|&i| &pairs[i]).collect();
            Batch::from_pairs(&refs, max_len)
        })
        .collect()
}

/// Batches in corpus order, no shuffling (for evaluation).
pub fn sequential_batches(pairs: &[DialoguePair], batch_size: usize, max_len: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return invalid("batch_size must be at least 1");
    }
    pairs
        .chunks(batch_size)
        .map(|c| Batch::from_pairs(&c.iter().collect::<Vec<_>>(), max_len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(n: usize) -> Vec<DialoguePair> {
        (0..n)
            .map(|i| DialoguePair::new(vec![4; 1 + i % 5], vec![5; 1 + i % 3]).unwrap())
            .collect()
    }

    #[test]
    fn padding_and_mask() {
        let p = Padded::with_eos(&[&[4, 5], &[6, 7, 8, 9]], MAX_SEQ_LEN).unwrap();
        assert_eq!(p.width(), 5);
        assert_eq!(p.rows()[0], [4, 5, EOS, PAD, PAD]);
        assert_eq!(p.mask_column(3), [false, true]);
        assert_eq!(p.lengths(), [3, 5]);
        assert_eq!(p.tokens(), 8);
    }

    #[test]
    fn truncation_keeps_eos() {
        let long: Vec<usize> = (4..100).collect();
        let p = Padded::with_eos(&[&long], MAX_SEQ_LEN).unwrap();
        assert_eq!(p.width(), MAX_SEQ_LEN + 1);
        assert_eq!(p.rows()[0][MAX_SEQ_LEN], EOS);
    }

    #[test]
    fn batch_sizes() {
        let b = make_batches(&pairs(3), 2, MAX_SEQ_LEN, 1, 0).unwrap();
        let mut sizes: Vec<usize> = b.iter().map(Batch::len).collect();
        sizes.sort();
        assert_eq!(sizes, [1, 2]);
        assert!(make_batches(&pairs(3), 0, MAX_SEQ_LEN, 1, 0).is_err());
    }

    #[test]
    fn same_seed_same_order() {
        let p = pairs(100);
        let a = make_batches(&p, 8, MAX_SEQ_LEN, 9, 3).unwrap();
        let b = make_batches(&p, 8, MAX_SEQ_LEN, 9, 3).unwrap();
        assert_eq!(a, b);
        let c = make_batches(&p, 8, MAX_SEQ_LEN, 9, 4).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.iter().map(Batch::len).sum::<usize>(), 100);
    }

    #[test]
    fn repad_extends_with_masked_pad() {
        let p = Padded::with_eos(&[&[4]], MAX_SEQ_LEN).unwrap();
        let q = p.repad(6).unwrap();
        assert_eq!(q.width(), 6);
        assert_eq!(q.tokens(), 2);
        assert!(p.repad(1).is_err());
    }
}
