//! Subcommand implementations behind the `topomlp` binary.
//!
//! Each command writes its outputs into one run directory: either the one
//! given explicitly or a fresh timestamped directory under an output root.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::autodiff::{read_checkpoint, write_checkpoint};
use crate::cochain::CochainSet;
use crate::complex::{adjacency_0, boundary_1, boundary_2, build_clique_complex, hodge_laplacian, incidence_0_2};
use crate::config::RunConfig;
use crate::data::{load_bundle, make_synthetic, save_bundle, GraphBundle, Split, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{
    base_infer_logits, topo_infer_logits, BaseScnParams, ModelDims, MultiplyCounter, TopoMlpParams,
};
use crate::noise::{noise_sweep, perturb_bundle, sweep_csv, sweep_dat, sweep_means, threads_from_env};
use crate::trainer::{fit, measure_inference, SimplicialData, Timing, TrainedParams};

/// Where a command writes its files.
#[derive(Debug, Clone)]
pub enum RunDir {
    /// Use exactly this directory (created if missing).
    Exact(PathBuf),
    /// Create `<root>/<command>-<timestamp>`.
    Under(PathBuf),
}

impl RunDir {
    pub fn create(&self, command: &str) -> Result<PathBuf> {
        let dir = match self {
            RunDir::Exact(p) => p.clone(),
            RunDir::Under(root) => {
                let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
                let base = root.join(format!("{command}-{stamp}"));
                let mut dir = base.clone();
                let mut i = 1;
                while dir.exists() {
                    dir = PathBuf::from(format!("{}-{i}", base.display()));
                    i += 1;
                }
                dir
            }
        };
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_file(path, text + "\n")
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

fn dataset_name(cfg: &RunConfig) -> String {
    cfg.data
        .as_ref()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "-".into())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Counts line, e.g. `3 vertices, 3 edges, 1 triangle`.
pub fn complex_summary(bundle: &GraphBundle) -> String {
    let c = build_clique_complex(&bundle.graph);
    format!(
        "{}, {}, {}",
        plural(c.count(0), "vertex", "vertices"),
        plural(c.count(1), "edge", "edges"),
        plural(c.count(2), "triangle", "triangles")
    )
}

/// Writes simplex counts and every structure matrix as coordinate text.
pub fn cmd_build_complex(bundle_dir: &Path, out: &RunDir) -> Result<(PathBuf, String)> {
    let bundle = load_bundle(bundle_dir)?;
    let dir = out.create("build-complex")?;
    let c = build_clique_complex(&bundle.graph);
    let summary = complex_summary(&bundle);
    write_file(&dir.join("counts.txt"), format!("{summary}\n"))?;
    let mats = [
        ("a0.coo", adjacency_0(&c)),
        ("b1.coo", boundary_1(&c)),
        ("b2.coo", boundary_2(&c)),
        ("b02.coo", incidence_0_2(&c)),
        ("l0.coo", hodge_laplacian(&c, 0)?),
        ("l1.coo", hodge_laplacian(&c, 1)?),
        ("l2.coo", hodge_laplacian(&c, 2)?),
    ];
    for (name, m) in mats {
        let header = format!("# {} x {}, {} nonzeros\n", m.n_rows(), m.n_cols(), m.nnz());
        write_file(&dir.join(name), header + &m.to_coo_text())?;
    }
    Ok((dir, summary))
}

#[derive(Debug, Serialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub train_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct TrainMetrics {
    pub model: String,
    pub dataset: String,
    /// Mean over seeds.
    pub test_accuracy: f64,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub test_accuracy_std: f64,
    pub noise_delta: f64,
    pub noise_apply: String,
    pub per_seed: Vec<SeedMetrics>,
}

/// Bundles seen at training and at test time after optional corruption.
fn corrupted_views(cfg: &RunConfig, clean: GraphBundle) -> Result<(GraphBundle, GraphBundle)> {
    let spec = cfg.noise_spec();
    if spec.delta == 0.0 {
        return Ok((clean.clone(), clean));
    }
    let noisy = perturb_bundle(&clean, &spec)?;
    let train = if spec.apply_to.at_train() { noisy.clone() } else { clean.clone() };
    let test = if spec.apply_to.at_inference() { noisy } else { clean };
    Ok((train, test))
}

fn seed_dir(dir: &Path, seeds: &[u64], seed: u64) -> Result<PathBuf> {
    if seeds.len() == 1 {
        return Ok(dir.to_path_buf());
    }
    let d = dir.join(format!("seed-{seed}"));
    fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    Ok(d)
}

/// Trains `cfg.model` once per seed and records history, checkpoint and
/// test accuracy.
pub fn cmd_train(cfg: &RunConfig, out: &RunDir) -> Result<(PathBuf, TrainMetrics)> {
    cfg.validate()?;
    let bundle = load_bundle(cfg.data_dir()?)?;
    let (train_bundle, test_bundle) = corrupted_views(cfg, bundle)?;
    let dir = out.create("train")?;
    write_file(&dir.join("config"), cfg.to_text())?;

    let mut per_seed = Vec::new();
    for &seed in &cfg.seeds {
        let start = Instant::now();
        let outcome = fit(cfg.model, &train_bundle, &cfg.train_config(seed))?;
        let train_seconds = start.elapsed().as_secs_f64();
        let acc = outcome.params.evaluate(&test_bundle, Split::Test, cfg.train.combiner)?;
        let sd = seed_dir(&dir, &cfg.seeds, seed)?;
        write_file(&sd.join("history.csv"), outcome.history.to_csv())?;
        write_checkpoint(&sd.join("best.ckpt"), &outcome.params.named())?;
        per_seed.push(SeedMetrics {
            seed,
            test_accuracy: acc,
            best_epoch: outcome.best_epoch,
            best_val_accuracy: outcome.best_val,
            train_seconds,
        });
    }
    let accs: Vec<f64> = per_seed.iter().map(|s| s.test_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    let metrics = TrainMetrics {
        model: cfg.model.to_string(),
        dataset: dataset_name(cfg),
        test_accuracy: mean,
        test_accuracy_std: std,
        noise_delta: cfg.noise_delta,
        noise_apply: cfg.noise_apply.to_string(),
        per_seed,
    };
    write_json(&dir.join("metrics.json"), &metrics)?;

    let mut csv = String::from("model,dataset,seed,test_accuracy\n");
    for s in &metrics.per_seed {
        let _ = writeln!(csv, "{},{},{},{}", metrics.model, metrics.dataset, s.seed, s.test_accuracy);
    }
    write_file(&dir.join("results.csv"), csv)?;
    write_file(&dir.join("table.txt"), accuracy_table(&[(&metrics.model, &metrics.dataset, &accs)]))?;
    Ok((dir, metrics))
}

/// Aligned accuracy table: one row per model, `mean ± std` in percent.
pub fn accuracy_table(rows: &[(&str, &str, &[f64])]) -> String {
    let mut out = format!("{:<8} {:<12} {:>16} {:>6}\n", "Model", "Dataset", "Test accuracy", "Seeds");
    for (model, data, accs) in rows {
        let (m, s) = mean_std(accs);
        let cell = format!("{:.1} ± {:.1}", 100.0 * m, 100.0 * s);
        let _ = writeln!(out, "{model:<8} {data:<12} {cell:>16} {:>6}", accs.len());
    }
    out
}

fn load_params(run_dir: &Path, seed: Option<u64>) -> Result<TrainedParams> {
    let path = match seed {
        Some(s) if run_dir.join(format!("seed-{s}")).is_dir() => run_dir.join(format!("seed-{s}")).join("best.ckpt"),
        _ => run_dir.join("best.ckpt"),
    };
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    TrainedParams::from_named(read_checkpoint(&path)?)
}

/// Configuration a run directory was trained with.
pub fn load_run_config(run_dir: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply_file(&run_dir.join("config"))?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
pub struct EvalMetrics {
    pub split: String,
    pub accuracy: f64,
    pub dataset: String,
}

/// Accuracy of a trained run on `split`. `data` replaces the dataset the run
/// was trained on (e.g. a corrupted copy).
pub fn cmd_eval(run_dir: &Path, split: Split, data: Option<&Path>, seed: Option<u64>) -> Result<EvalMetrics> {
    let mut cfg = load_run_config(run_dir)?;
    if let Some(d) = data {
        cfg.data = Some(d.to_path_buf());
    }
    let bundle = load_bundle(cfg.data_dir()?)?;
    let params = load_params(run_dir, seed)?;
    let accuracy = params.evaluate(&bundle, split, cfg.train.combiner)?;
    let metrics = EvalMetrics {
        split: split.to_string(),
        accuracy,
        dataset: dataset_name(&cfg),
    };
    write_json(&run_dir.join(format!("eval-{split}.json")), &metrics)?;
    Ok(metrics)
}

#[derive(Debug, Serialize)]
pub struct ModelTiming {
    pub model: String,
    pub mean_s: f64,
    pub std_s: f64,
    pub runs: usize,
    /// Matrix products per forward pass, excluding the classifier.
    pub hidden_multiplies: usize,
    pub head_multiplies: usize,
}

#[derive(Debug, Serialize)]
pub struct BenchMetrics {
    pub dataset: String,
    pub topo: ModelTiming,
    pub base: ModelTiming,
    /// Topo-MLP mean time over baseline mean time.
    pub ratio: f64,
}

fn timing_row(model: &str, t: Timing, c: MultiplyCounter) -> ModelTiming {
    ModelTiming {
        model: model.into(),
        mean_s: t.mean,
        std_s: t.std,
        runs: t.runs,
        hidden_multiplies: c.hidden,
        head_multiplies: c.head,
    }
}

/// Times eval-mode node inference of both models on the full dataset.
/// Parameters come from the given run directories, or are freshly
/// initialized at the configured width when a run is not given.
pub fn bench_inference(
    bundle: &GraphBundle,
    cfg: &RunConfig,
    topo: Option<TopoMlpParams<f32>>,
    base: Option<BaseScnParams<f32>>,
) -> Result<BenchMetrics> {
    let data = SimplicialData::build(bundle, cfg.train.combiner)?;
    let d = bundle.d;
    let dims = ModelDims {
        vertex_in: d,
        edge_in: d,
        face_in: d,
        hidden: cfg.train.hidden,
        classes: bundle.classes,
    };
    let seed = cfg.seeds[0];
    let topo = match topo {
        Some(p) => p,
        None => TopoMlpParams::init(dims, seed)?,
    };
    let base = match base {
        Some(p) => p,
        None => BaseScnParams::init(dims, seed)?,
    };
    let cs: &CochainSet = &data.cochains;
    let structure = data.base_structure();

    let mut topo_count = MultiplyCounter::default();
    topo_infer_logits(&cs.vertex.data, &topo, &mut topo_count)?;
    let mut base_count = MultiplyCounter::default();
    base_infer_logits(&cs.vertex.data, &cs.edge.data, &cs.face.data, &structure, &base, &mut base_count)?;

    let t = measure_inference(
        || {
            let mut c = MultiplyCounter::default();
            std::hint::black_box(topo_infer_logits(&cs.vertex.data, &topo, &mut c)?);
            Ok(())
        },
        cfg.runs,
        cfg.warmup,
    )?;
    let b = measure_inference(
        || {
            let mut c = MultiplyCounter::default();
            std::hint::black_box(base_infer_logits(
                &cs.vertex.data,
                &cs.edge.data,
                &cs.face.data,
                &structure,
                &base,
                &mut c,
            )?);
            Ok(())
        },
        cfg.runs,
        cfg.warmup,
    )?;
    Ok(BenchMetrics {
        dataset: dataset_name(cfg),
        ratio: t.mean / b.mean,
        topo: timing_row("topo", t, topo_count),
        base: timing_row("base", b, base_count),
    })
}

/// Aligned inference-time table in seconds.
pub fn timing_table(m: &BenchMetrics) -> String {
    let mut out = format!("{:<8} {:>22} {:>10}\n", "Model", m.dataset, "Multiplies");
    for r in [&m.topo, &m.base] {
        let cell = format!("{:.4} ± {:.4}", r.mean_s, r.std_s);
        let _ = writeln!(out, "{:<8} {cell:>22} {:>10}", r.model, r.hidden_multiplies);
    }
    let _ = writeln!(out, "ratio topo/base = {:.3} (speedup {:.2}x)", m.ratio, 1.0 / m.ratio);
    out
}

pub fn cmd_bench(
    cfg: &RunConfig,
    topo_run: Option<&Path>,
    base_run: Option<&Path>,
    out: &RunDir,
) -> Result<(PathBuf, BenchMetrics)> {
    cfg.validate()?;
    let bundle = load_bundle(cfg.data_dir()?)?;
    let topo = match topo_run {
        Some(r) => match load_params(r, None)? {
            TrainedParams::Topo(p) => Some(p),
            TrainedParams::Base(_) => return Err(Error::Checkpoint(format!("{} holds a base model", r.display()))),
        },
        None => None,
    };
    let base = match base_run {
        Some(r) => match load_params(r, None)? {
            TrainedParams::Base(p) => Some(p),
            TrainedParams::Topo(_) => return Err(Error::Checkpoint(format!("{} holds a topo model", r.display()))),
        },
        None => None,
    };
    let metrics = bench_inference(&bundle, cfg, topo, base)?;
    let dir = out.create("bench")?;
    write_file(&dir.join("config"), cfg.to_text())?;
    write_json(&dir.join("bench.json"), &metrics)?;
    write_file(&dir.join("table.txt"), timing_table(&metrics))?;
    Ok((dir, metrics))
}

/// Runs the (δ, seed, model) grid and writes raw cells, means and a table.
pub fn cmd_noise_sweep(cfg: &RunConfig, out: &RunDir) -> Result<(PathBuf, String)> {
    cfg.validate()?;
    let bundle = load_bundle(cfg.data_dir()?)?;
    let mut sweep = cfg.sweep_config();
    if sweep.threads == 0 {
        sweep.threads = threads_from_env()?;
    }
    let dir = out.create("noise-sweep")?;
    write_file(&dir.join("config"), cfg.to_text())?;
    let cells = noise_sweep(&bundle, &sweep)?;
    write_file(&dir.join("noise_sweep.csv"), sweep_csv(&cells))?;
    write_file(&dir.join("noise_sweep.dat"), sweep_dat(&cells))?;
    let mut table = format!("{:<8}", "delta");
    for m in &sweep.models {
        let _ = write!(table, " {:>8}", m.to_string());
    }
    table.push('\n');
    let means = sweep_means(&cells);
    for &d in &sweep.deltas {
        let _ = write!(table, "{d:<8}");
        for m in &sweep.models {
            let v = means.iter().find(|x| x.0 == d && x.1 == *m).map_or(f64::NAN, |x| x.2);
            let _ = write!(table, " {:>8.1}", 100.0 * v);
        }
        table.push('\n');
    }
    write_file(&dir.join("table.txt"), &table)?;
    Ok((dir, table))
}

/// Generates a planted-partition bundle into `out`.
pub fn cmd_make_synthetic(spec: &SyntheticSpec, out: &Path) -> Result<String> {
    let bundle = make_synthetic(spec)?;
    save_bundle(&bundle, out)?;
    Ok(complex_summary(&bundle))
}
