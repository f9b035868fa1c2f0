//! Corpus ingestion, vocabulary, and padded batching.

mod batch;
mod corpus;
pub mod toy;
mod vocab;

pub use batch::{make_batches, sequential_batches, Batch, Padded, MAX_SEQ_LEN};
pub use corpus::{encode_corpus, load_corpus, parse_corpus, tokenize, Corpus, DialoguePair, TextPair};
pub use vocab::{Vocabulary, BOS, EOS, NUM_SPECIAL, PAD, SPECIAL_TOKENS, UNK};
