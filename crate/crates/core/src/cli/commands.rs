use std::fs::{self, OpenOptions};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::cli::checkpoint::{model_spec, Checkpoint};
use crate::cli::config::RunConfig;
use crate::data::{encode_corpus, load_corpus, tokenize, DialoguePair, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{eval_report, EvalReport, HumanEvalTable};
use crate::model::{EpochReport, Model, Trainer};

pub const BEST: &str = "best.ckpt";
pub const LAST: &str = "last.ckpt";
pub const METRICS: &str = "metrics.log";
pub const VOCAB: &str = "vocab.txt";

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs: Vec<EpochReport>,
    pub best: PathBuf,
    pub last: PathBuf,
    pub metrics: PathBuf,
    /// Epoch the run resumed after, if it continued an earlier one.
    pub resumed_from: Option<u64>,
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("`{key}` is required for training")))
}

/// Hyperparameter lines that shape the training trajectory. The stopping
/// budget is left out so a resumed run may extend it.
fn trajectory_keys(cfg: &RunConfig) -> Vec<String> {
    cfg.hyper_text()
        .lines()
        .filter(|l| !l.starts_with("max_epochs=") && !l.starts_with("patience="))
        .map(str::to_string)
        .collect()
}

/// Trains `cfg.kind` on `cfg.train_file`, validating on `cfg.valid_file` for
/// early stopping. With `merge_valid` the validation pairs join the training
/// set and the run lasts `max_epochs`.
///
/// Writes `vocab.txt`, `last.ckpt` after every epoch, `best.ckpt` whenever
/// validation improves (every epoch when there is no validation set), and one
/// `metrics.log` line per epoch.
pub fn cmd_train(cfg: &RunConfig, merge_valid: bool) -> Result<TrainSummary> {
    cfg.validate()?;
    let lower = cfg.train.lowercase;
    let train_text = load_corpus(required(&cfg.train_file, "train_file")?, lower)?;
    let valid_text = match &cfg.valid_file {
        Some(p) => Some(load_corpus(p, lower)?),
        None if merge_valid => return Err(Error::Config("--merge-valid needs `valid_file`".into())),
        None => None,
    };

    fs::create_dir_all(&cfg.out_dir)?;
    let best = cfg.out_dir.join(BEST);
    let last = cfg.out_dir.join(LAST);
    let metrics = cfg.out_dir.join(METRICS);

    let resume = if cfg.resume && last.exists() {
        let ck = Checkpoint::load(&last)?;
        if trajectory_keys(&ck.config) != trajectory_keys(cfg) {
            return Err(Error::Config(format!(
                "{} was written with different hyperparameters; refusing to resume",
                last.display()
            )));
        }
        Some(ck)
    } else {
        None
    };

    let vocab = match (&resume, &cfg.vocab_file) {
        (Some(ck), _) => ck.vocab.clone(),
        (None, Some(p)) => Vocabulary::load(p)?,
        (None, None) => {
            let mut sentences: Vec<&[String]> = train_text.sentences().collect();
            if merge_valid {
                sentences.extend(valid_text.iter().flat_map(|c| c.sentences()));
            }
            Vocabulary::build(sentences, cfg.train.vocab_size)?
        }
    };
    vocab.save(&cfg.out_dir.join(VOCAB))?;

    let mut train = encode_corpus(&vocab, &train_text)?;
    let mut valid: Option<Vec<DialoguePair>> = match &valid_text {
        Some(c) => Some(encode_corpus(&vocab, c)?),
        None => None,
    };
    if merge_valid {
        train.extend(valid.take().unwrap_or_default());
    }
    log::info!(
        "training {} on {} pairs ({} validation), vocabulary {}",
        cfg.kind,
        train.len(),
        valid.as_ref().map_or(0, Vec::len),
        vocab.len()
    );

    let resumed_from = resume.as_ref().map(|ck| ck.state.epoch);
    let mut trainer = match resume {
        Some(ck) => {
            let mut t = Trainer::new(ck.model, cfg.train.clone())?;
            if let Some(a) = ck.adam {
                t.adam = a;
            }
            t.state = ck.state;
            log::info!("resuming after epoch {} (step {})", t.state.epoch, t.state.step);
            t
        }
        None => {
            if metrics.exists() {
                fs::remove_file(&metrics)?;
            }
            let model = Model::initialized(model_spec(cfg, &vocab), cfg.train.init_range, cfg.train.seed)?;
            Trainer::new(model, cfg.train.clone())?
        }
    };

    let mut epochs = Vec::new();
    while !trainer.finished() {
        let report = trainer.run_epoch_with(&train, valid.as_deref(), |step, b| {
            log::debug!("step={step} {}", b.log_fields());
        })?;
        let line = report.metrics_line();
        log::info!("{line}");
        let mut f = OpenOptions::new().create(true).append(true).open(&metrics)?;
        writeln!(f, "{line}")?;

        let ck = Checkpoint {
            config: cfg.clone(),
            vocab: vocab.clone(),
            model: trainer.model.clone(),
            adam: Some(trainer.adam.clone()),
            state: trainer.state,
        };
        ck.save(&last)?;
        if report.improved || report.val_total.is_none() {
            ck.save(&best)?;
        }
        epochs.push(report);
    }
    if !best.exists() {
        fs::copy(&last, &best)?;
    }
    Ok(TrainSummary {
        epochs,
        best,
        last,
        metrics,
        resumed_from,
    })
}

/// Greedy response to one raw utterance, as space-joined tokens.
pub fn respond(ck: &Checkpoint, utterance: &str) -> Result<String> {
    let tokens = tokenize(utterance, ck.config.train.lowercase);
    if tokens.is_empty() {
        return Err(Error::Invalid("empty utterance".into()));
    }
    let ids = ck.vocab.encode(&tokens);
    let out = ck.model.generate(&ids, ck.config.train.max_gen_len)?;
    Ok(ck.vocab.decode(&out).join(" "))
}

const GENERATE_CHUNK: usize = 64;

/// One greedy response per input line. Output lines are byte-identical across
/// runs for the same checkpoint and input.
pub fn generate_lines(ck: &Checkpoint, lines: &[String], origin: &Path) -> Result<Vec<String>> {
    let mut sources = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let tokens = tokenize(line, ck.config.train.lowercase);
        if tokens.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: "empty utterance".into(),
            });
        }
        sources.push(ck.vocab.encode(&tokens));
    }
    let mut out = Vec::with_capacity(lines.len());
    for chunk in sources.chunks(GENERATE_CHUNK) {
        for ids in ck.model.generate_batch(chunk, ck.config.train.max_gen_len)? {
            out.push(ck.vocab.decode(&ids).join(" "));
        }
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?.lines().map(str::to_string).collect())
}

/// Reads utterances from `input`, writes responses to `output`. Returns the
/// number of lines written.
pub fn cmd_generate(ckpt: &Path, input: &Path, output: &Path) -> Result<usize> {
    let ck = Checkpoint::load(ckpt)?;
    let lines = read_lines(input)?;
    let out = generate_lines(&ck, &lines, input)?;
    let mut text = out.join("\n");
    if !out.is_empty() {
        text.push('\n');
    }
    fs::write(output, text)?;
    Ok(out.len())
}

/// Scores line-aligned hypothesis and reference files, with optional human
/// ratings. Writes the machine-readable lines to `report_out` when given.
pub fn cmd_evaluate(hyp: &Path, reference: &Path, scores: Option<&Path>, report_out: Option<&Path>) -> Result<EvalReport> {
    let h = read_lines(hyp)?;
    let r = read_lines(reference)?;
    if h.len() != r.len() {
        return Err(Error::Invalid(format!(
            "{} has {} lines but {} has {}",
            hyp.display(),
            h.len(),
            reference.display(),
            r.len()
        )));
    }
    let table = scores.map(HumanEvalTable::load).transpose()?;
    let report = eval_report(&h, &r, table.as_ref())?;
    if let Some(p) = report_out {
        fs::write(p, report.machine_lines().join("\n") + "\n")?;
    }
    Ok(report)
}

pub const QUIT: &str = "/quit";

/// Read-eval loop: one utterance per line in, one response per line out.
/// Stops at `/quit` or end of input; a read failure also ends the session.
/// Each exchange is appended to `transcript` when given. Returns the number of
/// exchanges.
pub fn cmd_chat<R: BufRead, W: Write>(
    ck: &Checkpoint,
    mut input: R,
    mut output: W,
    mut transcript: Option<&mut dyn Write>,
) -> Result<usize> {
    let mut exchanges = 0;
    loop {
        write!(output, "> ")?;
        output.flush()?;
        let mut line = String::new();
        match input.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                log::warn!("input closed: {e}");
                break;
            }
        }
        let line = line.trim();
        if line == QUIT {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let reply = respond(ck, line)?;
        writeln!(output, "{reply}")?;
        if let Some(t) = transcript.as_mut() {
            writeln!(t, "user: {line}\nbot: {reply}")?;
        }
        exchanges += 1;
    }
    Ok(exchanges)
}
