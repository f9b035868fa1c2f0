//! Train-to-early-stopping comparisons of model kinds on one corpus split.

use std::time::{Duration, Instant};

use crate::cli::checkpoint::model_spec;
use crate::cli::config::RunConfig;
use crate::data::{DialoguePair, Vocabulary};
use crate::error::Result;
use crate::eval::corpus_bleu;
use crate::model::{Model, ModelKind, Trainer};

/// Outcome of one (kind, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunScore {
    pub kind: ModelKind,
    pub seed: u64,
    pub epochs: u64,
    pub steps: u64,
    /// Validation BLEU-4 of greedy responses from the best-validation model.
    pub bleu4: f64,
    pub best_val: Option<f64>,
    pub elapsed: Duration,
}

/// Trains `cfg.kind` until early stopping, keeping the parameters with the
/// lowest validation loss, then scores greedy responses on `valid`.
pub fn train_and_score(
    cfg: &RunConfig,
    vocab: &Vocabulary,
    train: &[DialoguePair],
    valid: &[DialoguePair],
) -> Result<RunScore> {
    let start = Instant::now();
    let model = Model::<f32>::initialized(model_spec(cfg, vocab), cfg.train.init_range, cfg.train.seed)?;
    let mut trainer = Trainer::new(model, cfg.train.clone())?;
    let mut best = trainer.model.clone();
    while !trainer.finished() {
        let report = trainer.run_epoch(train, Some(valid))?;
        log::info!("{} seed={} {}", cfg.kind, cfg.train.seed, report.metrics_line());
        if report.improved {
            best = trainer.model.clone();
        }
    }
    let bleu4 = validation_bleu(&best, valid, cfg.train.max_gen_len)?;
    Ok(RunScore {
        kind: cfg.kind,
        seed: cfg.train.seed,
        epochs: trainer.state.epoch,
        steps: trainer.state.step,
        bleu4,
        best_val: trainer.state.best_val,
        elapsed: start.elapsed(),
    })
}

/// Corpus BLEU-4 of greedy responses against the gold targets.
pub fn validation_bleu(model: &Model<f32>, pairs: &[DialoguePair], max_len: usize) -> Result<f64> {
    let sources: Vec<Vec<usize>> = pairs.iter().map(|p| p.source.clone()).collect();
    let mut hyps = Vec::with_capacity(pairs.len());
    for chunk in sources.chunks(128) {
        hyps.extend(model.generate_batch(chunk, max_len)?);
    }
    let refs: Vec<&[usize]> = pairs.iter().map(|p| p.target.as_slice()).collect();
    Ok(corpus_bleu(&hyps, &refs, 4)?.bleu(4))
}

/// Per-seed comparison of a proposed kind against its baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub proposed: ModelKind,
    pub baseline: ModelKind,
    /// `(seed, proposed BLEU-4, baseline BLEU-4)`
    pub per_seed: Vec<(u64, f64, f64)>,
}

impl Comparison {
    pub fn wins(&self) -> usize {
        self.per_seed.iter().filter(|(_, p, b)| p >= b).count()
    }
}

/// Runs every kind in `pairs` (proposed, baseline) for every seed.
pub fn compare(
    base: &RunConfig,
    vocab: &Vocabulary,
    train: &[DialoguePair],
    valid: &[DialoguePair],
    pairs: &[(ModelKind, ModelKind)],
    seeds: &[u64],
) -> Result<(Vec<Comparison>, Vec<RunScore>)> {
    let mut runs = Vec::new();
    let mut out = Vec::new();
    for &(proposed, baseline) in pairs {
        let mut per_seed = Vec::new();
        for &seed in seeds {
            let score = |kind| {
                let mut cfg = base.clone();
                cfg.kind = kind;
                cfg.train.seed = seed;
                train_and_score(&cfg, vocab, train, valid)
            };
            let p = score(proposed)?;
            let b = score(baseline)?;
            per_seed.push((seed, p.bleu4, b.bleu4));
            runs.push(p);
            runs.push(b);
        }
        out.push(Comparison {
            proposed,
            baseline,
            per_seed,
        });
    }
    Ok((out, runs))
}
