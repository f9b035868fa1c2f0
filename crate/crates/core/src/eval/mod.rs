//! Corpus BLEU, distinct-n, and human-rating aggregation.

pub mod bleu;
pub mod diversity;
pub mod human;
pub mod report;

pub use bleu::{corpus_bleu, sentence_bleu_smoothed, BleuReport};
pub use diversity::{distinct_ngrams, diversity, DiversityReport};
pub use human::{g_score, pearson, Cell, HumanEvalTable, HumanSummary};
pub use report::{eval_report, EvalReport};
