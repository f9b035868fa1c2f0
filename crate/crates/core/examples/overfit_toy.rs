//! Overfits the AEM model on 32 synthetic pairs and checks that greedy
//! generation reproduces the training responses.
//!
//! cargo run --release --example overfit_toy [-- <kind> <batch_size> <steps> <lr> [templates]]
//!
//! `templates` swaps the fixed small-talk pairs for 32 templated dialogues.

use aem::data::{encode_corpus, toy, Batch, Corpus, Vocabulary};
use aem::model::{train_step, Model, ModelKind, ModelSpec, TrainingConfig};
use aem::nn::AdamState;

fn main() -> aem::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let kind: ModelKind = args.get(1).map_or(Ok(ModelKind::Aem), |s| s.parse())?;
    let batch_size: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(32);
    let steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(500);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.002);

    let long = args.get(5).is_some_and(|s| s == "templates");
    let corpus = Corpus {
        pairs: if long { toy::dialogues(32, 1) } else { toy::small_talk() },
        skipped: 0,
    };
    let vocab = Vocabulary::build(corpus.sentences(), 1000)?;
    let pairs = encode_corpus(&vocab, &corpus)?;
    let cfg = TrainingConfig {
        hidden_size: 32,
        embed_size: 16,
        vocab_size: vocab.len(),
        batch_size,
        learning_rate: lr,
        ..Default::default()
    };
    let mut model = Model::<f32>::initialized(ModelSpec::from_config(kind, &cfg, vocab.len()), cfg.init_range, cfg.seed)?;
    let mut adam = AdamState::new(cfg.adam());
    let refs: Vec<_> = pairs.iter().collect();
    let batches: Vec<Batch> = refs
        .chunks(batch_size)
        .map(|c| Batch::from_pairs(c, cfg.max_seq_len))
        .collect::<aem::Result<_>>()?;

    let start = std::time::Instant::now();
    for step in 1..=steps {
        let b = train_step(&mut model, &batches[(step - 1) % batches.len()], &cfg, &mut adam)?;
        if step % (steps / 10).max(1) == 0 {
            println!("step {step:>3}  {}", b.log_fields());
        }
    }
    let sources: Vec<Vec<usize>> = pairs.iter().map(|p| p.source.clone()).collect();
    let out = model.generate_batch(&sources, cfg.max_gen_len)?;
    let exact = out.iter().zip(&pairs).filter(|(o, p)| **o == p.target).count();
    println!("{kind}: {exact}/32 responses reproduced exactly in {:.1?}", start.elapsed());
    for (o, p) in out.iter().zip(&pairs).take(3) {
        println!("  {}  ->  {}", vocab.decode(&p.source).join(" "), vocab.decode(o).join(" "));
    }
    Ok(())
}
