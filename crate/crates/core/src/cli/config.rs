use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Mapping, ModelKind, TrainingConfig};

/// A training run: model kind, data paths, hyperparameters.
///
/// Read from flat `key = value` text; `#` starts a comment. Relative paths are
/// resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub mapping: Mapping,
    pub train: TrainingConfig,
    pub train_file: Option<PathBuf>,
    pub valid_file: Option<PathBuf>,
    /// Existing vocabulary to reuse instead of building one.
    pub vocab_file: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Continue from `out_dir/last.ckpt` when it exists.
    pub resume: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Aem,
            mapping: Mapping::Mlp,
            train: TrainingConfig::default(),
            train_file: None,
            valid_file: None,
            vocab_file: None,
            out_dir: PathBuf::from("run"),
            resume: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}` (expected true/false)"))),
    }
}

fn parse_mapping(value: &str) -> Result<Mapping> {
    match value {
        "mlp" => Ok(Mapping::Mlp),
        "identity" => Ok(Mapping::Identity),
        _ => Err(Error::Config(format!("unknown mapping `{value}`"))),
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let t = &mut self.train;
        let path = |v: &str| base.join(v);
        match key {
            "model" => self.kind = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "mapping" => self.mapping = parse_mapping(value)?,
            "train_file" => self.train_file = Some(path(value)),
            "valid_file" => self.valid_file = Some(path(value)),
            "vocab_file" => self.vocab_file = Some(path(value)),
            "out_dir" => self.out_dir = path(value),
            "resume" => self.resume = parse_bool(key, value)?,
            "lambda1" => t.lambda1 = parse(key, value)?,
            "lambda2" => t.lambda2 = parse(key, value)?,
            "lambda3" => t.lambda3 = parse(key, value)?,
            "hidden_size" => t.hidden_size = parse(key, value)?,
            "embed_size" => t.embed_size = parse(key, value)?,
            "vocab_size" => t.vocab_size = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "max_gen_len" => t.max_gen_len = parse(key, value)?,
            "detach_j3" => t.detach_j3 = parse_bool(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "epsilon" => t.epsilon = parse(key, value)?,
            "clip_norm" => t.clip_norm = parse(key, value)?,
            "init_range" => t.init_range = parse(key, value)?,
            "max_seq_len" => t.max_seq_len = parse(key, value)?,
            "lowercase" => t.lowercase = parse_bool(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` text on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &Path, base: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: format!("expected key = value, got `{line}`"),
            })?;
            self.set(k.trim(), v.trim(), base).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, origin, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, path, base)
    }

    /// Applies `key=value` overrides (flags win over the file), then revalidates.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            self.set(k.trim(), v.trim(), Path::new(""))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.mapping == Mapping::Identity && !self.kind.is_aem() {
            return Err(Error::Config("mapping applies to AEM kinds only".into()));
        }
        Ok(())
    }

    /// Hyperparameters and model choice as `key=value` lines. Paths are left
    /// out, so the text describes the model rather than the machine.
    pub fn hyper_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("model", self.kind.name().into());
        kv("mapping", self.mapping.name().into());
        kv("lambda1", t.lambda1.to_string());
        kv("lambda2", t.lambda2.to_string());
        kv("lambda3", t.lambda3.to_string());
        kv("hidden_size", t.hidden_size.to_string());
        kv("embed_size", t.embed_size.to_string());
        kv("vocab_size", t.vocab_size.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv("max_gen_len", t.max_gen_len.to_string());
        kv("detach_j3", t.detach_j3.to_string());
        kv("seed", t.seed.to_string());
        kv("beta1", t.beta1.to_string());
        kv("beta2", t.beta2.to_string());
        kv("epsilon", t.epsilon.to_string());
        kv("clip_norm", t.clip_norm.to_string());
        kv("init_range", t.init_range.to_string());
        kv("max_seq_len", t.max_seq_len.to_string());
        kv("lowercase", t.lowercase.to_string());
        kv("patience", t.patience.to_string());
        kv("max_epochs", t.max_epochs.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let text = "# toy run\nmodel = seq2seq_attention\nhidden_size=32 # small\ntrain_file = data/train.tsv\n";
        let cfg = RunConfig::from_text(text, Path::new("c.cfg"), Path::new("/runs")).unwrap();
        assert_eq!(cfg.kind, ModelKind::Seq2SeqAttention);
        assert_eq!(cfg.train.hidden_size, 32);
        assert_eq!(cfg.train_file.as_deref(), Some(Path::new("/runs/data/train.tsv")));
        let cfg = cfg.with_overrides(&["hidden_size=8", "seed=9"]).unwrap();
        assert_eq!((cfg.train.hidden_size, cfg.train.seed), (8, 9));
    }

    #[test]
    fn rejections() {
        let e = RunConfig::from_text("seed=1\nbogus = 3\n", Path::new("c.cfg"), Path::new("")).unwrap_err();
        assert!(e.to_string().contains("c.cfg:2"), "{e}");
        assert!(RunConfig::from_text("lambda2 = -1\n", Path::new("c"), Path::new("")).is_err());
        assert!(RunConfig::from_text("hidden_size\n", Path::new("c"), Path::new("")).is_err());
        assert!(RunConfig::from_text("detach_j3 = maybe\n", Path::new("c"), Path::new("")).is_err());
        assert!(RunConfig::default().with_overrides(&["nokey"]).is_err());
    }

    #[test]
    fn hyper_text_round_trips() {
        let mut cfg = RunConfig {
            kind: ModelKind::AemAttention,
            ..Default::default()
        };
        cfg.train.lambda2 = 0.125;
        cfg.train.detach_j3 = false;
        let back = RunConfig::from_text(&cfg.hyper_text(), Path::new("x"), Path::new("")).unwrap();
        assert_eq!(back.train, cfg.train);
        assert_eq!(back.kind, cfg.kind);
    }
}
