use std::collections::HashSet;
use std::hash::Hash;

/// Distinct n-gram counts over a whole set of generated responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiversityReport {
    pub dist1: usize,
    pub dist2: usize,
    pub dist3: usize,
}

/// Number of distinct `n`-grams across all sentences. N-grams never span two
/// sentences; `n = 0` gives 0.
pub fn distinct_ngrams<S, X>(sentences: &[X], n: usize) -> usize
where
    S: Eq + Hash,
    X: AsRef<[S]>,
{
    if n == 0 {
        return 0;
    }
    let mut seen: HashSet<&[S]> = HashSet::new();
    for s in sentences {
        let s = s.as_ref();
        if s.len() >= n {
            seen.extend(s.windows(n));
        }
    }
    seen.len()
}

pub fn diversity<S: Eq + Hash, X: AsRef<[S]>>(sentences: &[X]) -> DiversityReport {
    DiversityReport {
        dist1: distinct_ngrams(sentences, 1),
        dist2: distinct_ngrams(sentences, 2),
        dist3: distinct_ngrams(sentences, 3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Vec<&str> {
        x.split_whitespace().collect()
    }

    #[test]
    fn counts() {
        assert_eq!(distinct_ngrams(&[s("a a a")], 1), 1);
        let d = diversity(&[s("i am fine"), s("i am good")]);
        assert_eq!(d, DiversityReport { dist1: 4, dist2: 3, dist3: 2 });
        assert_eq!(distinct_ngrams(&[s("a b")], 3), 0);
        // no n-gram spans the boundary between sentences
        assert_eq!(distinct_ngrams(&[s("a"), s("b")], 2), 0);
    }
}
