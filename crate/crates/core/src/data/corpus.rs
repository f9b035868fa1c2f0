use std::fs;
use std::path::Path;

use crate::data::vocab::{Vocabulary, BOS, EOS, PAD};
use crate::error::{invalid, Error, Result};

/// Lowercases (optionally) and splits on whitespace runs.
pub fn tokenize(utterance: &str, lowercase: bool) -> Vec<String> {
    let text = if lowercase {
        utterance.to_lowercase()
    } else {
        utterance.to_string()
    };
    text.split_whitespace().map(str::to_string).collect()
}

/// A tokenized `(source, target)` line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub pairs: Vec<TextPair>,
    /// Lines dropped because one side was empty.
    pub skipped: usize,
}

impl Corpus {
    pub fn sentences(&self) -> impl Iterator<Item = &[String]> {
        self.pairs
            .iter()
            .flat_map(|p| [p.source.as_slice(), p.target.as_slice()])
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Parses `source<TAB>target` lines.
pub fn parse_corpus(text: &str, origin: &Path, lowercase: bool) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                msg: format!("expected exactly one TAB, found {}", fields.len() - 1),
            });
        }
        let source = tokenize(fields[0], lowercase);
        let target = tokenize(fields[1], lowercase);
        if source.is_empty() || target.is_empty() {
            corpus.skipped += 1;
            continue;
        }
        corpus.pairs.push(TextPair { source, target });
    }
    if corpus.skipped > 0 {
        log::warn!("{}: skipped {} pairs with an empty side", origin.display(), corpus.skipped);
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path, lowercase: bool) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })?;
    parse_corpus(&text, path, lowercase)
}

/// Id-encoded pair. Neither side is empty and neither holds PAD, BOS or EOS;
/// EOS is appended at batching time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialoguePair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl DialoguePair {
    pub fn new(source: Vec<usize>, target: Vec<usize>) -> Result<Self> {
        for (side, ids) in [("source", &source), ("target", &target)] {
            if ids.is_empty() {
                return invalid(format!("{side} side of a dialogue pair is empty"));
            }
            if ids.iter().any(|&i| i == PAD || i == BOS || i == EOS) {
                return invalid(format!("{side} side holds a reserved PAD/BOS/EOS id"));
            }
        }
        Ok(Self { source, target })
    }

    pub fn encode(vocab: &Vocabulary, pair: &TextPair) -> Result<Self> {
        Self::new(vocab.encode(&pair.source), vocab.encode(&pair.target))
    }
}

pub fn encode_corpus(vocab: &Vocabulary, corpus: &Corpus) -> Result<Vec<DialoguePair>> {
    corpus.pairs.iter().map(|p| DialoguePair::encode(vocab, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("How are you?", true), ["how", "are", "you?"]);
        assert_eq!(tokenize("  a   b ", true), ["a", "b"]);
        assert!(tokenize("", true).is_empty());
        assert_eq!(tokenize("Hi", false), ["Hi"]);
    }

    #[test]
    fn parse_lines() {
        let c = parse_corpus("hello\thi there\n", Path::new("x"), true).unwrap();
        assert_eq!(c.pairs[0].source, ["hello"]);
        assert_eq!(c.pairs[0].target, ["hi", "there"]);

        let err = parse_corpus("a\tb\nx\ty\tz\n", Path::new("f.tsv"), true).unwrap_err();
        assert!(err.to_string().contains("f.tsv:2"), "{err}");
        assert!(parse_corpus("no tab here", Path::new("f"), true).is_err());

        let c = parse_corpus("a\t \n\tb\nc\td\n", Path::new("x"), true).unwrap();
        assert_eq!(c.pairs.len(), 1);
        assert_eq!(c.skipped, 2);

        assert!(parse_corpus("", Path::new("x"), true).unwrap().is_empty());
    }

    #[test]
    fn pair_rejects_reserved_ids() {
        assert!(DialoguePair::new(vec![4], vec![5]).is_ok());
        assert!(DialoguePair::new(vec![], vec![5]).is_err());
        assert!(DialoguePair::new(vec![4, EOS], vec![5]).is_err());
    }
}
