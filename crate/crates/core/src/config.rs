//! Flat `key=value` run configuration.
//!
//! Files hold one `key=value` per line; blank lines and lines starting with
//! `#` are ignored. Unknown keys are rejected. Every run writes the fully
//! resolved configuration back in the same format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::{NoiseSpec, NoiseTarget, SweepConfig};
use crate::trainer::{ModelKind, TrainConfig};

/// Every accepted key with a one-line description, in output order.
pub const KEYS: &[(&str, &str)] = &[
    ("data", "graph bundle directory"),
    ("model", "topo | base | mlp (mlp = topo with all beta_* = 0)"),
    ("seeds", "comma-separated seeds; one training run each"),
    ("epochs", "training epochs"),
    ("hidden", "width of every hidden layer"),
    ("dropout", "dropout rate in [0, 1)"),
    ("lr", "Adam learning rate"),
    ("weight_decay", "L2 penalty added to gradients"),
    ("batch_v", "vertices sampled per step, or auto = min(2000, n)"),
    ("batch_e", "edges sampled per step, or auto = min(2000, m)"),
    ("batch_f", "triangles sampled per step, or auto = min(2000, t)"),
    ("steps_per_epoch", "optimizer steps per epoch"),
    ("mu_v", "vertex contrastive temperature"),
    ("mu_e", "edge contrastive temperature"),
    ("mu_f", "triangle contrastive temperature"),
    ("beta_v", "vertex contrastive multiplier"),
    ("beta_e", "edge contrastive multiplier"),
    ("beta_f", "triangle contrastive multiplier"),
    ("exclude_diagonal", "drop self-pairs from the vertex term (true | false)"),
    ("signed_b1", "use the signed node-edge incidence as weights (true | false)"),
    ("combiner", "vertex-to-simplex feature combiner: max | min | mean | prod"),
    ("eval_every", "epochs between validation passes"),
    ("log_every", "epochs between progress lines on stderr, 0 = silent"),
    ("noise_delta", "edge corruption ratio in [0, 1) for train"),
    ("noise_seed", "seed of the corruption draw for train"),
    ("noise_apply", "phase that sees corrupted edges: train | inference | both"),
    ("deltas", "comma-separated corruption ratios for noise-sweep"),
    ("sweep_models", "comma-separated models for noise-sweep"),
    ("threads", "worker threads for noise-sweep, 0 = all cores"),
    ("runs", "timed forward passes for bench"),
    ("warmup", "untimed forward passes before timing"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub model: ModelKind,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub noise_delta: f64,
    pub noise_seed: u64,
    pub noise_apply: NoiseTarget,
    pub deltas: Vec<f64>,
    pub sweep_models: Vec<ModelKind>,
    pub threads: usize,
    pub runs: usize,
    pub warmup: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            data: None,
            model: ModelKind::Topo,
            seeds: vec![0],
            train: TrainConfig::default(),
            noise_delta: 0.0,
            noise_seed: 0,
            noise_apply: NoiseTarget::Both,
            deltas: sweep.deltas,
            sweep_models: sweep.models,
            threads: 0,
            runs: 50,
            warmup: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{v}` for `{key}` (expected true or false)"))),
    }
}

fn parse_batch(key: &str, v: &str) -> Result<Option<usize>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

fn parse_models(key: &str, v: &str) -> Result<Vec<ModelKind>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ModelKind>().map_err(|_| Error::Config(format!("invalid model `{s}` in `{key}`"))))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn batch_text(b: Option<usize>) -> String {
    b.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key.trim() {
            "data" => self.data = (!v.is_empty()).then(|| PathBuf::from(v)),
            "model" => self.model = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "hidden" => t.hidden = parse(key, v)?,
            "dropout" => t.dropout = parse(key, v)?,
            "lr" => t.adam.lr = parse(key, v)?,
            "weight_decay" => t.adam.weight_decay = parse(key, v)?,
            "batch_v" => t.batch_v = parse_batch(key, v)?,
            "batch_e" => t.batch_e = parse_batch(key, v)?,
            "batch_f" => t.batch_f = parse_batch(key, v)?,
            "steps_per_epoch" => t.steps_per_epoch = parse(key, v)?,
            "mu_v" => t.honc.mu_v = parse(key, v)?,
            "mu_e" => t.honc.mu_e = parse(key, v)?,
            "mu_f" => t.honc.mu_f = parse(key, v)?,
            "beta_v" => t.honc.beta_v = parse(key, v)?,
            "beta_e" => t.honc.beta_e = parse(key, v)?,
            "beta_f" => t.honc.beta_f = parse(key, v)?,
            "exclude_diagonal" => t.honc.exclude_diagonal = parse_bool(key, v)?,
            "signed_b1" => t.honc.signed_b1 = parse_bool(key, v)?,
            "combiner" => t.combiner = parse(key, v)?,
            "eval_every" => t.eval_every = parse(key, v)?,
            "log_every" => t.log_every = parse(key, v)?,
            "noise_delta" => self.noise_delta = parse(key, v)?,
            "noise_seed" => self.noise_seed = parse(key, v)?,
            "noise_apply" => self.noise_apply = v.parse()?,
            "deltas" => self.deltas = parse_list(key, v)?,
            "sweep_models" => self.sweep_models = parse_models(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "runs" => self.runs = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` text, one assignment per line.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                file: source.to_string(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            self.set(k, v).map_err(|e| Error::Format {
                file: source.to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k, v)
    }

    fn value_of(&self, key: &str) -> String {
        let t = &self.train;
        match key {
            "data" => self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "model" => self.model.to_string(),
            "seeds" => join(&self.seeds),
            "epochs" => t.epochs.to_string(),
            "hidden" => t.hidden.to_string(),
            "dropout" => t.dropout.to_string(),
            "lr" => t.adam.lr.to_string(),
            "weight_decay" => t.adam.weight_decay.to_string(),
            "batch_v" => batch_text(t.batch_v),
            "batch_e" => batch_text(t.batch_e),
            "batch_f" => batch_text(t.batch_f),
            "steps_per_epoch" => t.steps_per_epoch.to_string(),
            "mu_v" => t.honc.mu_v.to_string(),
            "mu_e" => t.honc.mu_e.to_string(),
            "mu_f" => t.honc.mu_f.to_string(),
            "beta_v" => t.honc.beta_v.to_string(),
            "beta_e" => t.honc.beta_e.to_string(),
            "beta_f" => t.honc.beta_f.to_string(),
            "exclude_diagonal" => t.honc.exclude_diagonal.to_string(),
            "signed_b1" => t.honc.signed_b1.to_string(),
            "combiner" => t.combiner.to_string(),
            "eval_every" => t.eval_every.to_string(),
            "log_every" => t.log_every.to_string(),
            "noise_delta" => self.noise_delta.to_string(),
            "noise_seed" => self.noise_seed.to_string(),
            "noise_apply" => self.noise_apply.to_string(),
            "deltas" => join(&self.deltas),
            "sweep_models" => join(&self.sweep_models),
            "threads" => self.threads.to_string(),
            "runs" => self.runs.to_string(),
            "warmup" => self.warmup.to_string(),
            _ => unreachable!("key table and value_of disagree on `{key}`"),
        }
    }

    /// Fully resolved configuration, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(out, "{k}={}", self.value_of(k));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.noise_spec().validate()?;
        for &d in &self.deltas {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("delta {d} outside [0, 1)")));
            }
        }
        if self.sweep_models.is_empty() {
            return Err(Error::Config("sweep_models is empty".into()));
        }
        if self.runs < 2 {
            return Err(Error::Config("runs must be at least 2".into()));
        }
        Ok(())
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (set `data` or pass --data)".into()))
    }

    /// Training configuration with `seed` substituted.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            delta: self.noise_delta,
            seed: self.noise_seed,
            apply_to: self.noise_apply,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            deltas: self.deltas.clone(),
            seeds: self.seeds.clone(),
            models: self.sweep_models.clone(),
            apply_to: self.noise_apply,
            train: self.train.clone(),
            threads: self.threads,
        }
    }
}

/// Key reference appended to `--help`.
pub fn key_help() -> String {
    let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let defaults = RunConfig::default();
    let mut out = String::from("Configuration keys (file lines or --set KEY=VALUE):\n");
    for (k, doc) in KEYS {
        let _ = writeln!(out, "  {k:<width$}  {doc} [default: {}]", defaults.value_of(k));
    }
    out
}
