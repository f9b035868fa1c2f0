use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const NUM_SPECIAL: usize = 4;
pub const SPECIAL_TOKENS: [&str; NUM_SPECIAL] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token ↔ id bijection. Ids 0..4 are the specials; the remaining tokens are
/// ordered by descending corpus frequency with lexicographic tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `max_size - 4` most frequent tokens.
    pub fn build<'a, I, S>(sentences: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if max_size <= NUM_SPECIAL {
            return invalid(format!("vocabulary max_size must be at least {}, got {max_size}", NUM_SPECIAL + 1));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for sentence in sentences {
            any = true;
            for tok in sentence {
                let tok = tok.as_ref();
                if SPECIAL_TOKENS.contains(&tok) {
                    continue;
                }
                *counts.entry(tok).or_default() += 1;
            }
        }
        if !any {
            return invalid("cannot build a vocabulary from an empty corpus");
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - NUM_SPECIAL);
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()))
    }

    /// Vocabulary from the non-special tokens in id order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut all: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return invalid(format!("vocabulary token {i} is empty or contains whitespace"));
            }
            if index.insert(t.clone(), i).is_some() {
                return invalid(format!("duplicate vocabulary token `{t}`"));
            }
        }
        Ok(Self { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `token`, or [`UNK`] when it is not in the vocabulary.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(SPECIAL_TOKENS[UNK]).to_string())
            .collect()
    }

    /// One non-special token per line; line `n` (0-based) holds id `n + 4`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens[NUM_SPECIAL..] {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(str::to_string))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn frequency_cut() {
        let corpus = [toks("a a b")];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 5).unwrap();
        assert_eq!(v.tokens(), ["<pad>", "<bos>", "<eos>", "<unk>", "a"]);
        assert_eq!(v.encode(&["a", "b"]), [4, UNK]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let corpus = [toks("c b a a")];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 10).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.id("c"), 6);
        assert_eq!(v.id("zzz"), UNK);
    }

    #[test]
    fn rejects_tiny_max_and_empty_corpus() {
        let corpus = [toks("a")];
        assert!(Vocabulary::build(corpus.iter().map(Vec::as_slice), 4).is_err());
        let empty: [Vec<String>; 0] = [];
        assert!(Vocabulary::build(empty.iter().map(Vec::as_slice), 10).is_err());
    }

    #[test]
    fn text_round_trip() {
        let corpus = [toks("x y y z z z")];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 100).unwrap();
        assert_eq!(v.to_text(), "z\ny\nx\n");
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
    }
}
