//! Saves a briefly trained model with its optimizer state, loads it back and
//! checks that generation is unchanged.
//!
//! cargo run --release --example checkpoint_roundtrip

use aem::cli::{model_spec, Checkpoint, RunConfig};
use aem::data::{encode_corpus, toy, Corpus, Vocabulary};
use aem::model::{Model, ModelKind, Trainer};

fn main() -> aem::Result<()> {
    let corpus = Corpus {
        pairs: toy::dialogues(200, 3),
        skipped: 0,
    };
    let vocab = Vocabulary::build(corpus.sentences(), 8000)?;
    let pairs = encode_corpus(&vocab, &corpus)?;

    let mut cfg = RunConfig {
        kind: ModelKind::Aem,
        ..Default::default()
    };
    cfg.train.hidden_size = 16;
    cfg.train.embed_size = 8;
    cfg.train.max_epochs = 2;
    let model = Model::<f32>::initialized(model_spec(&cfg, &vocab), cfg.train.init_range, cfg.train.seed)?;
    let mut trainer = Trainer::new(model, cfg.train.clone())?;
    while !trainer.finished() {
        println!("{}", trainer.run_epoch(&pairs, None)?.metrics_line());
    }

    let ck = Checkpoint {
        config: cfg.clone(),
        vocab: vocab.clone(),
        model: trainer.model.clone(),
        adam: Some(trainer.adam.clone()),
        state: trainer.state,
    };
    let path = std::env::temp_dir().join(format!("aem-example-{}.ckpt", std::process::id()));
    ck.save(&path)?;
    let size = std::fs::metadata(&path)?.len();
    let back = Checkpoint::load(&path)?;
    std::fs::remove_file(&path)?;

    let sources: Vec<Vec<usize>> = pairs.iter().take(20).map(|p| p.source.clone()).collect();
    let before = trainer.model.generate_batch(&sources, cfg.train.max_gen_len)?;
    let after = back.model.generate_batch(&sources, cfg.train.max_gen_len)?;
    println!(
        "{size} bytes, {} tensors, epoch {}, step {}",
        back.model.params.len(),
        back.state.epoch,
        back.state.step
    );
    println!("parameters bit-identical: {}", back.model.params.bit_identical(&trainer.model.params));
    println!("generations identical:    {}", before == after);
    Ok(())
}
