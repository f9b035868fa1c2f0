//! Trains AEM with attention on synthetic dialogues for a few epochs, then
//! answers held-out utterances.
//!
//! cargo run --release --example attention_chat [-- <epochs>]

use aem::cli::{model_spec, RunConfig};
use aem::data::{encode_corpus, tokenize, toy, Corpus, Vocabulary};
use aem::model::{Model, ModelKind, Trainer};

fn main() -> aem::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let all = toy::dialogues(1100, 7);
    let train_text = Corpus {
        pairs: all[..1000].to_vec(),
        skipped: 0,
    };
    let vocab = Vocabulary::build(train_text.sentences(), 8000)?;
    let train = encode_corpus(&vocab, &train_text)?;

    let mut cfg = RunConfig {
        kind: ModelKind::AemAttention,
        ..Default::default()
    };
    cfg.train.hidden_size = 32;
    cfg.train.embed_size = 16;
    cfg.train.batch_size = 16;
    cfg.train.max_epochs = epochs;
    let model = Model::<f32>::initialized(model_spec(&cfg, &vocab), cfg.train.init_range, cfg.train.seed)?;
    let mut trainer = Trainer::new(model, cfg.train.clone())?;
    while !trainer.finished() {
        let r = trainer.run_epoch(&train, None)?;
        log::info!("{}", r.metrics_line());
    }

    for pair in &all[1000..1008] {
        let ids = vocab.encode(&tokenize(&pair.source.join(" "), true));
        let out = trainer.model.generate_with_attention(&ids, cfg.train.max_gen_len)?;
        println!("> {}", pair.source.join(" "));
        println!("  {}", vocab.decode(&out).join(" "));
        println!("  (gold: {})", pair.target.join(" "));
    }
    Ok(())
}
