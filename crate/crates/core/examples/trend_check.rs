//! Trains AEM, AEM+attention and both Seq2Seq baselines to early stopping on
//! synthetic dialogues and compares validation BLEU-4 per seed.
//!
//! cargo run --release --example trend_check -- [train_pairs] [hidden] [embed] [seeds] [batch] [max_epochs]
//!
//! Defaults: 5000 training pairs, hidden 128, embed 64, 3 seeds, batch 64, 30 epochs.

use aem::cli::experiment::compare;
use aem::cli::RunConfig;
use aem::data::{encode_corpus, toy, Corpus, Vocabulary};
use aem::model::ModelKind;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> aem::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let n_train: usize = arg(1, 5000);
    let n_valid = (n_train / 10).max(20);
    let seeds: Vec<u64> = (1..=arg(4, 3u64)).collect();

    let all = toy::dialogues(n_train + n_valid, 2024);
    let train_text = Corpus {
        pairs: all[..n_train].to_vec(),
        skipped: 0,
    };
    let valid_text = Corpus {
        pairs: all[n_train..].to_vec(),
        skipped: 0,
    };
    let vocab = Vocabulary::build(train_text.sentences(), 8000)?;
    let train = encode_corpus(&vocab, &train_text)?;
    let valid = encode_corpus(&vocab, &valid_text)?;

    let mut cfg = RunConfig::default();
    cfg.train.hidden_size = arg(2, 128);
    cfg.train.embed_size = arg(3, 64);
    cfg.train.vocab_size = 8000;
    cfg.train.batch_size = arg(5, 64);
    cfg.train.max_epochs = arg(6, 30);

    let (comparisons, runs) = compare(
        &cfg,
        &vocab,
        &train,
        &valid,
        &[
            (ModelKind::Aem, ModelKind::Seq2Seq),
            (ModelKind::AemAttention, ModelKind::Seq2SeqAttention),
        ],
        &seeds,
    )?;
    for r in &runs {
        println!(
            "{:<18} seed={} epochs={:>2} steps={:>5} bleu4={:>6.2} ({:.0?})",
            r.kind.name(),
            r.seed,
            r.epochs,
            r.steps,
            r.bleu4,
            r.elapsed
        );
    }
    for c in &comparisons {
        println!("{} >= {} on {}/{} seeds", c.proposed, c.baseline, c.wins(), c.per_seed.len());
    }
    Ok(())
}
