//! Auto-encoder matching for dialogue generation.
//!
//! Two LSTM auto-encoders learn utterance representations for inputs and
//! responses; an MLP learns to map the input representation onto the
//! response representation. At test time the source-encoder, the mapping, and
//! the target-decoder run in sequence. Plain Seq2Seq and attention baselines
//! share the same building blocks.
//!
//! Everything runs on a small reverse-mode differentiation engine in [`nn`].

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod nn;

pub use error::{Error, Result};
