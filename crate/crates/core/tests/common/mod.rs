//! Independent reference implementations shared by integration tests.

use aem::nn::rng::SplitMix64;

/// Clipped matches and totals by plain scanning, no hashing.
pub fn brute_counts(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    if hyp.len() < n {
        return (0, 0);
    }
    let grams = |s: &[String]| -> Vec<Vec<String>> {
        if s.len() < n {
            return Vec::new();
        }
        (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
    };
    let (hg, rg) = (grams(hyp), grams(reference));
    let mut seen: Vec<&Vec<String>> = Vec::new();
    let mut matched = 0;
    for g in &hg {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        let in_hyp = hg.iter().filter(|x| *x == g).count();
        let in_ref = rg.iter().filter(|x| *x == g).count();
        matched += in_hyp.min(in_ref);
    }
    (matched, hg.len())
}

pub fn brute_bleu(hyps: &[Vec<String>], refs: &[Vec<String>], n: usize) -> f64 {
    let c: usize = hyps.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let mut log_p = 0.0;
    for k in 1..=n {
        let (mut m, mut t) = (0, 0);
        for (h, rf) in hyps.iter().zip(refs) {
            let (a, b) = brute_counts(h, rf, k);
            m += a;
            t += b;
        }
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_p += (m as f64 / t as f64).ln();
    }
    let bp = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    100.0 * bp * (log_p / n as f64).exp()
}

pub fn random_sentence(rng: &mut SplitMix64, vocab: usize, max_len: usize) -> Vec<String> {
    let len = 1 + rng.below(max_len);
    (0..len).map(|_| format!("w{}", rng.below(vocab))).collect()
}

pub fn random_corpus(seed: u64, pairs: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut rng = SplitMix64::new(seed);
    let hyps = (0..pairs).map(|_| random_sentence(&mut rng, 6, 12)).collect();
    let refs = (0..pairs).map(|_| random_sentence(&mut rng, 6, 12)).collect();
    (hyps, refs)
}

/// Distinct n-grams by linear search over everything seen so far.
pub fn enumerate_distinct(sentences: &[Vec<String>], n: usize) -> usize {
    let mut all: Vec<Vec<String>> = Vec::new();
    for s in sentences {
        for w in s.windows(n) {
            if !all.contains(&w.to_vec()) {
                all.push(w.to_vec());
            }
        }
    }
    all.len()
}
