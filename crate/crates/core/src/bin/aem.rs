use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use aem::cli::{cmd_chat, cmd_evaluate, cmd_generate, cmd_train, Checkpoint, RunConfig};
use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aem", version, about = "Auto-encoder matching dialogue models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Add the validation pairs to the training set (no early stopping).
        #[arg(long)]
        merge_valid: bool,
        /// Override a config key, e.g. `--set hidden_size=128`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write one greedy response per input line.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// BLEU, distinct-n and optional human-rating aggregation.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// CSV with item_id,annotator_id,fluency,coherence.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Also write the key=value report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Interactive session; `/quit` exits.
    Chat {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train {
            config,
            merge_valid,
            overrides,
        } => {
            let cfg = RunConfig::load(&config)
                .and_then(|c| c.with_overrides(&overrides))
                .with_context(|| format!("reading {}", config.display()))?;
            let s = cmd_train(&cfg, merge_valid)?;
            println!("best={}", s.best.display());
            println!("last={}", s.last.display());
            println!("metrics={}", s.metrics.display());
        }
        Command::Generate { ckpt, input, output } => {
            let n = cmd_generate(&ckpt, &input, &output)?;
            log::info!("wrote {n} responses to {}", output.display());
        }
        Command::Evaluate {
            hyp,
            reference,
            scores,
            report,
        } => {
            let r = cmd_evaluate(&hyp, &reference, scores.as_deref(), report.as_deref())?;
            print!("{}", r.table());
            for line in r.machine_lines() {
                println!("{line}");
            }
        }
        Command::Chat { ckpt, transcript } => {
            let ck = Checkpoint::load(&ckpt)?;
            let mut log_file = transcript.map(File::create).transpose()?;
            let stdin = io::stdin();
            let n = cmd_chat(
                &ck,
                stdin.lock(),
                io::stdout(),
                log_file.as_mut().map(|f| f as &mut dyn Write),
            )?;
            log::info!("{n} exchanges");
        }
    }
    Ok(())
}
