//! Command implementations behind the `aem` binary: training, generation,
//! evaluation, and interactive chat, plus run configs and checkpoints.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod experiment;

pub use checkpoint::{model_spec, Checkpoint};
pub use commands::{cmd_chat, cmd_evaluate, cmd_generate, cmd_train, generate_lines, respond, TrainSummary};
pub use config::RunConfig;
pub use experiment::{compare, train_and_score, validation_bleu, Comparison, RunScore};
