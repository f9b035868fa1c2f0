use crate::data::{make_batches, sequential_batches, Batch, DialoguePair};
use crate::error::{invalid, Result};
use crate::model::{LossAccumulator, LossBreakdown, Model, TrainingConfig};
use crate::nn::{adam_step, clip_grad_norm, AdamState, Real, Tape};

/// One optimization step: forward all loss terms, backward the weighted
/// total, clip, Adam. A non-finite term aborts before any parameter changes.
pub fn train_step<T: Real>(
    model: &mut Model<T>,
    batch: &Batch,
    cfg: &TrainingConfig,
    adam: &mut AdamState<T>,
) -> Result<LossBreakdown> {
    let w = cfg.weights();
    let mut g = Tape::new();
    let f = model.forward(&mut g, batch, &w, cfg.detach_j3)?;
    let breakdown = f.breakdown(&g, &w)?;
    model.params.zero_grad();
    g.backward(f.total, &mut model.params)?;
    clip_grad_norm(&mut model.params, cfg.clip_norm)?;
    adam_step(&mut model.params, adam)?;
    Ok(breakdown)
}

/// Token-pooled losses over `pairs`, in corpus order.
pub fn evaluate_pairs<T: Real>(model: &Model<T>, pairs: &[DialoguePair], cfg: &TrainingConfig) -> Result<LossBreakdown> {
    let w = cfg.weights();
    let mut acc = LossAccumulator::default();
    for batch in sequential_batches(pairs, cfg.batch_size, cfg.max_seq_len)? {
        let b = model.evaluate(&batch, &w, cfg.detach_j3)?;
        acc.add(&b, batch.source.tokens(), batch.target.tokens(), batch.len());
    }
    acc.finish(&w)
}

/// Progress counters that make training resumable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainerState {
    /// Completed epochs.
    pub epoch: u64,
    /// Completed optimizer steps.
    pub step: u64,
    pub best_val: Option<f64>,
    /// Consecutive epochs without validation improvement.
    pub bad_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based epoch number.
    pub epoch: u64,
    pub train: LossBreakdown,
    pub val_total: Option<f64>,
    /// Whether this epoch set a new best validation loss.
    pub improved: bool,
}

impl EpochReport {
    /// `epoch=<n> j1=.. j2=.. j3=.. j4=.. total=.. val_total=..`
    pub fn metrics_line(&self) -> String {
        let val = self
            .val_total
            .map_or_else(|| "na".to_string(), |v| format!("{v:.6}"));
        format!("epoch={} {} val_total={val}", self.epoch, self.train.log_fields())
    }
}

/// Epoch loop with validation-based early stopping.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: Model<T>,
    pub adam: AdamState<T>,
    pub cfg: TrainingConfig,
    pub state: TrainerState,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: Model<T>, cfg: TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            adam: AdamState::new(cfg.adam()),
            model,
            cfg,
            state: TrainerState::default(),
        })
    }

    /// Runs one epoch over `train` (batched with a shuffle keyed on the seed
    /// and epoch number), then evaluates on `valid` if given.
    pub fn run_epoch(&mut self, train: &[DialoguePair], valid: Option<&[DialoguePair]>) -> Result<EpochReport> {
        self.run_epoch_with(train, valid, |_, _| {})
    }

    /// [`Trainer::run_epoch`] with a callback after every step.
    pub fn run_epoch_with(
        &mut self,
        train: &[DialoguePair],
        valid: Option<&[DialoguePair]>,
        mut on_step: impl FnMut(u64, &LossBreakdown),
    ) -> Result<EpochReport> {
        if train.is_empty() {
            return invalid("training corpus is empty");
        }
        let batches = make_batches(train, self.cfg.batch_size, self.cfg.max_seq_len, self.cfg.seed, self.state.epoch)?;
        let w = self.cfg.weights();
        let mut acc = LossAccumulator::default();
        for batch in &batches {
            let b = train_step(&mut self.model, batch, &self.cfg, &mut self.adam)?;
            self.state.step += 1;
            on_step(self.state.step, &b);
            acc.add(&b, batch.source.tokens(), batch.target.tokens(), batch.len());
        }
        self.state.epoch += 1;

        let val_total = match valid {
            Some(v) if !v.is_empty() => Some(evaluate_pairs(&self.model, v, &self.cfg)?.total),
            _ => None,
        };
        let improved = match (val_total, self.state.best_val) {
            (Some(v), Some(best)) => v < best,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            self.state.best_val = val_total;
            self.state.bad_epochs = 0;
        } else if val_total.is_some() {
            self.state.bad_epochs += 1;
        }
        Ok(EpochReport {
            epoch: self.state.epoch,
            train: acc.finish(&w)?,
            val_total,
            improved,
        })
    }

    /// True once the epoch budget is spent or validation stopped improving.
    pub fn finished(&self) -> bool {
        self.state.epoch >= self.cfg.max_epochs as u64 || self.state.bad_epochs >= self.cfg.patience.max(1)
    }
}
