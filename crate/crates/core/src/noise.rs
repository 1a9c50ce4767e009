//! Edge corruption and the robustness sweep.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::complex::Graph;
use crate::data::{GraphBundle, Split};
use crate::error::{Error, Result};
use crate::trainer::{fit, ModelKind, TrainConfig};

/// Environment variable that pins the worker thread count.
pub const THREADS_ENV: &str = "TOPOMLP_THREADS";

/// Which phase sees the corrupted graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseTarget {
    Train,
    Inference,
    Both,
}

impl NoiseTarget {
    pub fn at_train(self) -> bool {
        matches!(self, NoiseTarget::Train | NoiseTarget::Both)
    }

    pub fn at_inference(self) -> bool {
        matches!(self, NoiseTarget::Inference | NoiseTarget::Both)
    }
}

impl FromStr for NoiseTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(NoiseTarget::Train),
            "inference" => Ok(NoiseTarget::Inference),
            "both" => Ok(NoiseTarget::Both),
            other => Err(Error::Config(format!(
                "unknown noise target `{other}` (expected train, inference or both)"
            ))),
        }
    }
}

impl fmt::Display for NoiseTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseTarget::Train => "train",
            NoiseTarget::Inference => "inference",
            NoiseTarget::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
    pub apply_to: NoiseTarget,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config(format!("noise ratio must be in [0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Number of edges removed and added at ratio `delta`.
pub fn corruption_count(edges: usize, delta: f64) -> usize {
    (edges as f64 * delta).floor() as usize
}

/// Deletes `k = ⌊|E|·δ⌋` uniformly chosen edges and adds `k` distinct pairs
/// drawn from the non-edges of the input graph, so `|E|` is preserved.
pub fn perturb_graph(g: &Graph, spec: &NoiseSpec) -> Result<Graph> {
    spec.validate()?;
    let n = g.n_vertices();
    let m = g.n_edges();
    let k = corruption_count(m, spec.delta);
    if k == 0 {
        return Ok(g.clone());
    }
    let pairs = n * (n - 1) / 2;
    let non_edges = pairs - m;
    if non_edges < k {
        return Err(Error::InsufficientNonEdges {
            wanted: k,
            detail: format!("graph with {n} vertices and {m} edges has only {non_edges} non-edges"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(7);
    let mut deleted = vec![false; m];
    for i in index::sample(&mut rng, m, k) {
        deleted[i] = true;
    }
    let mut added: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(k);
    let cap = 1000 * k;
    let mut attempts = 0;
    while added.len() < k {
        if attempts == cap {
            return Err(Error::InsufficientNonEdges {
                wanted: k,
                detail: format!("found only {} after {cap} draws", added.len()),
            });
        }
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if g.has_edge(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        added.push(pair);
    }

    let kept = g
        .edges()
        .iter()
        .zip(&deleted)
        .filter(|(_, &d)| !d)
        .map(|(&e, _)| e);
    Graph::new(n, kept.chain(added))
}

/// Copy of `bundle` with its graph corrupted per `spec`.
pub fn perturb_bundle(bundle: &GraphBundle, spec: &NoiseSpec) -> Result<GraphBundle> {
    Ok(GraphBundle {
        graph: perturb_graph(&bundle.graph, spec)?,
        ..bundle.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub apply_to: NoiseTarget,
    /// Template for every cell; its seed is replaced by the cell seed.
    pub train: TrainConfig,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.0, 0.1, 0.3, 0.5, 0.7],
            seeds: (0..5).collect(),
            models: ModelKind::ALL.to_vec(),
            apply_to: NoiseTarget::Both,
            train: TrainConfig::default(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub delta: f64,
    pub model: ModelKind,
    pub seed: u64,
    pub accuracy: f64,
}

/// Trains and tests every (δ, seed, model) cell. The graph is corrupted
/// once per (δ, seed) and the clique complex rebuilt from the result.
/// Cells run in parallel; the output is sorted by (δ, model, seed).
pub fn noise_sweep(bundle: &GraphBundle, cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    bundle.validate()?;
    cfg.train.validate()?;
    if cfg.deltas.is_empty() || cfg.seeds.is_empty() || cfg.models.is_empty() {
        return Err(Error::Config("sweep needs at least one delta, seed and model".into()));
    }
    let mut jobs = Vec::new();
    for &delta in &cfg.deltas {
        NoiseSpec {
            delta,
            seed: 0,
            apply_to: cfg.apply_to,
        }
        .validate()?;
        for &seed in &cfg.seeds {
            for &model in &cfg.models {
                jobs.push((delta, seed, model));
            }
        }
    }

    let run = |&(delta, seed, model): &(f64, u64, ModelKind)| -> Result<SweepCell> {
        let spec = NoiseSpec {
            delta,
            seed,
            apply_to: cfg.apply_to,
        };
        let noisy = perturb_bundle(bundle, &spec)?;
        let train_on = if spec.apply_to.at_train() { &noisy } else { bundle };
        let test_on = if spec.apply_to.at_inference() { &noisy } else { bundle };
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let out = fit(model, train_on, &train_cfg)?;
        let accuracy = out.params.evaluate(test_on, Split::Test, train_cfg.combiner)?;
        Ok(SweepCell {
            delta,
            model,
            seed,
            accuracy,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut cells: Vec<SweepCell> = pool.install(|| jobs.par_iter().map(run).collect::<Result<_>>())?;
    cells.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.model.cmp(&b.model))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(cells)
}

/// Raw cells as `delta,model,seed,accuracy`.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("delta,model,seed,accuracy\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{},{}", c.delta, c.model, c.seed, c.accuracy);
    }
    out
}

/// Mean accuracy per (δ, model), keyed by the bit pattern of δ.
pub fn sweep_means(cells: &[SweepCell]) -> Vec<(f64, ModelKind, f64)> {
    let mut acc: BTreeMap<(u64, ModelKind), (f64, usize)> = BTreeMap::new();
    for c in cells {
        let e = acc.entry((c.delta.to_bits(), c.model)).or_insert((0.0, 0));
        e.0 += c.accuracy;
        e.1 += 1;
    }
    let mut out: Vec<_> = acc
        .into_iter()
        .map(|((d, m), (s, n))| (f64::from_bits(d), m, s / n as f64))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    out
}

/// Whitespace-separated table of mean accuracies, one row per δ and one
/// column per model, for plotting tools.
pub fn sweep_dat(cells: &[SweepCell]) -> String {
    let means = sweep_means(cells);
    let mut models: Vec<ModelKind> = means.iter().map(|m| m.1).collect();
    models.sort();
    models.dedup();
    let mut out = String::from("# delta");
    for m in &models {
        let _ = write!(out, " {m}");
    }
    out.push('\n');
    let mut deltas: Vec<f64> = means.iter().map(|m| m.0).collect();
    deltas.dedup();
    for d in deltas {
        let _ = write!(out, "{d}");
        for m in &models {
            match means.iter().find(|x| x.0 == d && x.1 == *m) {
                Some(x) => {
                    let _ = write!(out, " {}", x.2);
                }
                None => out.push_str(" nan"),
            }
        }
        out.push('\n');
    }
    out
}

/// Thread count from the environment, or 0 when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}
