//! Trains AEM on a small fixed corpus and shows what each auto-encoder
//! reconstructs, next to the response produced through the mapping.
//!
//! cargo run --release --example autoencoder [-- <steps>]

use aem::data::{encode_corpus, toy, Batch, Corpus, DialoguePair, Vocabulary};
use aem::model::{train_step, Model, ModelKind, ModelSpec, Role, TrainingConfig};
use aem::nn::AdamState;

fn main() -> aem::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let corpus = Corpus {
        pairs: toy::small_talk(),
        skipped: 0,
    };
    let vocab = Vocabulary::build(corpus.sentences(), 1000)?;
    let pairs = encode_corpus(&vocab, &corpus)?;
    let cfg = TrainingConfig {
        hidden_size: 32,
        embed_size: 16,
        vocab_size: vocab.len(),
        batch_size: pairs.len(),
        ..Default::default()
    };
    let spec = ModelSpec::from_config(ModelKind::Aem, &cfg, vocab.len());
    let mut model = Model::<f32>::initialized(spec, cfg.init_range, cfg.seed)?;
    let mut adam = AdamState::new(cfg.adam());
    let refs: Vec<&DialoguePair> = pairs.iter().collect();
    let batch = Batch::from_pairs(&refs, cfg.max_seq_len)?;
    for step in 1..=steps {
        let b = train_step(&mut model, &batch, &cfg, &mut adam)?;
        if step % (steps / 5).max(1) == 0 {
            println!("step {step:>4}  {}", b.log_fields());
        }
    }

    let words = |ids: &[usize]| vocab.decode(ids).join(" ");
    for p in pairs.iter().take(6) {
        let src = model.reconstruct(Role::Source, &p.source, cfg.max_gen_len)?;
        let tgt = model.reconstruct(Role::Target, &p.target, cfg.max_gen_len)?;
        let out = model.generate(&p.source, cfg.max_gen_len)?;
        println!("\nx      {}", words(&p.source));
        println!("x'     {}", words(&src));
        println!("y      {}", words(&p.target));
        println!("y'     {}", words(&tgt));
        println!("g(x)   {}", words(&out));
    }

    let h = model.represent(Role::Source, &pairs[0].source)?;
    let s = model.represent(Role::Target, &pairs[0].target)?;
    let t = model.represent(Role::Mapped, &pairs[0].source)?;
    let dist = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f32>().sqrt();
    println!(
        "\nstate dim {}; |h - s| = {:.3}, |g(h) - s| = {:.3}",
        h.values.len(),
        dist(&h.values, &s.values),
        dist(&t.values, &s.values)
    );
    Ok(())
}
