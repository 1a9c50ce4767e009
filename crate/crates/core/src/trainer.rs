//! Batch sampling, training loops, evaluation and inference timing.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Adam, AdamConfig, Tape};
use crate::cochain::{CochainSet, Combiner};
use crate::complex::{adjacency_0, boundary_1, build_clique_complex, incidence_0_2, SimplicialComplex2};
use crate::data::{GraphBundle, Split};
use crate::error::{Error, Result};
use crate::honc::{total_loss, HoncConfig, HoncDiagnostics, LossBreakdown, LossInputs};
use crate::linalg::Matrix;
use crate::model::{
    base_forward, base_infer_logits, topo_forward, topo_infer_nodes, BaseScnParams, BaseStructure, ModelDims,
    MultiplyCounter, TopoMlpParams,
};
use crate::sparse::SparseStructure;

/// Batch size used when none is configured, capped by the population.
pub const DEFAULT_BATCH: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Topo,
    Base,
    /// Topo-MLP with every contrastive multiplier forced to zero.
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Topo, ModelKind::Base, ModelKind::Mlp];
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topo" => Ok(ModelKind::Topo),
            "base" => Ok(ModelKind::Base),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::Config(format!("unknown model `{other}` (expected topo, base or mlp)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Topo => "topo",
            ModelKind::Base => "base",
            ModelKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
    /// Sampled vertices per step; `None` means `min(2000, n)`.
    pub batch_v: Option<usize>,
    pub batch_e: Option<usize>,
    pub batch_f: Option<usize>,
    pub honc: HoncConfig,
    pub combiner: Combiner,
    pub seed: u64,
    /// Validation accuracy is computed every this many epochs, and on the last.
    pub eval_every: usize,
    pub steps_per_epoch: usize,
    /// Print a progress line to stderr every this many epochs; 0 disables.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            hidden: 256,
            dropout: 0.6,
            adam: AdamConfig::default(),
            batch_v: None,
            batch_e: None,
            batch_f: None,
            honc: HoncConfig::default(),
            combiner: Combiner::Mean,
            seed: 0,
            eval_every: 1,
            steps_per_epoch: 1,
            log_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be > 0".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.eval_every == 0 || self.steps_per_epoch == 0 {
            return bad("eval_every and steps_per_epoch must be > 0".into());
        }
        if self.batch_v == Some(0) {
            return bad("batch_v must be > 0".into());
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) || !(a.weight_decay >= 0.0 && a.weight_decay.is_finite()) {
            return bad(format!("lr must be > 0 and weight_decay >= 0, got {} / {}", a.lr, a.weight_decay));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("adam betas must be in [0, 1) and eps > 0".into());
        }
        self.honc.validate()
    }
}

/// Clique complex, lifted cochains and structure matrices of one graph.
#[derive(Debug, Clone)]
pub struct SimplicialData {
    pub complex: SimplicialComplex2,
    pub cochains: CochainSet,
    pub a0: Arc<SparseStructure>,
    pub b1: Arc<SparseStructure>,
    pub b1_abs: Arc<SparseStructure>,
    pub b02: Arc<SparseStructure>,
}

impl SimplicialData {
    pub fn build(bundle: &GraphBundle, combiner: Combiner) -> Result<Self> {
        let complex = build_clique_complex(&bundle.graph);
        let cochains = CochainSet::lift(&bundle.features, &complex, combiner)?;
        let b1 = boundary_1(&complex);
        Ok(Self {
            a0: Arc::new(adjacency_0(&complex)),
            b1_abs: Arc::new(b1.abs()),
            b1: Arc::new(b1),
            b02: Arc::new(incidence_0_2(&complex)),
            cochains,
            complex,
        })
    }

    pub fn base_structure(&self) -> BaseStructure {
        BaseStructure {
            a0: Arc::clone(&self.a0),
            b1: Arc::clone(&self.b1),
            b02: Arc::clone(&self.b02),
        }
    }
}

/// Resolved per-step sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSizes {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
}

impl BatchSizes {
    /// Applies defaults and checks bounds against the complex. Edge or face
    /// sampling is switched off when its contrastive multiplier is zero.
    pub fn resolve(cfg: &TrainConfig, c: &SimplicialComplex2) -> Result<Self> {
        let pick = |want: Option<usize>, have: usize, name: &str| -> Result<usize> {
            match want {
                None => Ok(have.min(DEFAULT_BATCH)),
                Some(w) if w <= have => Ok(w),
                Some(w) => Err(Error::Config(format!("{name}={w} exceeds the {have} available"))),
            }
        };
        let vertices = pick(cfg.batch_v, c.count(0), "batch_v")?;
        if vertices == 0 {
            return Err(Error::Config("complex has no vertices".into()));
        }
        let mut edges = pick(cfg.batch_e, c.count(1), "batch_e")?;
        let mut faces = pick(cfg.batch_f, c.count(2), "batch_f")?;
        if cfg.honc.beta_e == 0.0 {
            edges = 0;
        }
        if cfg.honc.beta_f == 0.0 {
            faces = 0;
        }
        Ok(Self { vertices, edges, faces })
    }
}

/// One sampled training batch. Structure blocks are restricted to the
/// sampled ids; incidences to unsampled simplices are dropped.
#[derive(Debug, Clone)]
pub struct Batch {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub faces: Vec<usize>,
    pub x0: Matrix<f32>,
    pub x1: Matrix<f32>,
    pub x2: Matrix<f32>,
    pub a0: SparseStructure,
    pub b1: SparseStructure,
    pub b02: SparseStructure,
    /// Positions in `vertices` of training nodes, and their labels.
    pub ce_rows: Vec<usize>,
    pub ce_labels: Vec<usize>,
}

fn sample_ids<R: Rng + ?Sized>(rng: &mut R, population: usize, amount: usize) -> Result<Vec<usize>> {
    if amount > population {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {amount} of {population} without replacement"
        )));
    }
    if amount == population {
        return Ok((0..population).collect());
    }
    let mut ids = index::sample(rng, population, amount).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Uniform sampling without replacement of vertices, edges and faces. One
/// vertex sample is shared by all three structure blocks. `train_labels`
/// holds the class of every training node and `None` elsewhere.
pub fn sample_batch<R: Rng + ?Sized>(
    data: &SimplicialData,
    sizes: BatchSizes,
    signed_b1: bool,
    train_labels: &[Option<usize>],
    rng: &mut R,
) -> Result<Batch> {
    let c = &data.complex;
    if train_labels.len() != c.count(0) {
        return Err(Error::shape(
            "sample_batch",
            format!("{} labels for {} vertices", train_labels.len(), c.count(0)),
        ));
    }
    let vertices = sample_ids(rng, c.count(0), sizes.vertices)?;
    let edges = sample_ids(rng, c.count(1), sizes.edges)?;
    let faces = sample_ids(rng, c.count(2), sizes.faces)?;
    let b1_full = if signed_b1 { &data.b1 } else { &data.b1_abs };

    let mut ce_rows = Vec::new();
    let mut ce_labels = Vec::new();
    for (pos, &v) in vertices.iter().enumerate() {
        if let Some(l) = train_labels[v] {
            ce_rows.push(pos);
            ce_labels.push(l);
        }
    }

    Ok(Batch {
        x0: data.cochains.vertex.data.select_rows(&vertices),
        x1: data.cochains.edge.data.select_rows(&edges),
        x2: data.cochains.face.data.select_rows(&faces),
        a0: data.a0.submatrix(&vertices, &vertices)?,
        b1: b1_full.submatrix(&vertices, &edges)?,
        b02: data.b02.submatrix(&vertices, &faces)?,
        vertices,
        edges,
        faces,
        ce_rows,
        ce_labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_acc: Option<f64>,
    pub diagnostics: HoncDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,l_v,l_e,l_f,ce,total,val_acc";

    /// One row per epoch; `val_acc` is empty on epochs without evaluation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let l = &r.loss;
            let _ = write!(out, "{},{},{},{},{},{},", r.epoch, l.l_v, l.l_e, l.l_f, l.ce, l.total);
            if let Some(a) = r.val_acc {
                let _ = write!(out, "{a}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<P> {
    /// Parameters at the epoch with the best validation accuracy (ties go to
    /// the earlier epoch), or the final parameters without a validation split.
    pub params: P,
    pub history: History,
    pub best_epoch: usize,
    pub best_val: Option<f64>,
}

fn train_labels(bundle: &GraphBundle) -> Vec<Option<usize>> {
    (0..bundle.n)
        .map(|i| (bundle.splits[i] == Split::Train && bundle.labels[i] >= 0).then(|| bundle.labels[i] as usize))
        .collect()
}

/// Accuracy of `predictions` over the labeled nodes of `split`.
pub fn split_accuracy(predictions: &[usize], bundle: &GraphBundle, split: Split) -> Result<f64> {
    if predictions.len() != bundle.n {
        return Err(Error::shape(
            "split_accuracy",
            format!("{} predictions for {} nodes", predictions.len(), bundle.n),
        ));
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for (i, &p) in predictions.iter().enumerate() {
        if bundle.splits[i] == split && bundle.labels[i] >= 0 {
            total += 1;
            hits += usize::from(p as i64 == bundle.labels[i]);
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument(format!("split `{split}` has no labeled nodes")));
    }
    Ok(hits as f64 / total as f64)
}

/// Accuracy of Topo-MLP on `split`, reading vertex features only.
pub fn evaluate(params: &TopoMlpParams<f32>, bundle: &GraphBundle, split: Split) -> Result<f64> {
    let x0 = crate::cochain::row_l1_normalize(&bundle.features);
    split_accuracy(&topo_infer_nodes(&x0, params)?, bundle, split)
}

/// Accuracy of the baseline on `split`, using the structure of `bundle`.
pub fn evaluate_base(
    params: &BaseScnParams<f32>,
    bundle: &GraphBundle,
    split: Split,
    combiner: Combiner,
) -> Result<f64> {
    let data = SimplicialData::build(bundle, combiner)?;
    evaluate_base_on(params, &data, bundle, split)
}

fn evaluate_base_on(
    params: &BaseScnParams<f32>,
    data: &SimplicialData,
    bundle: &GraphBundle,
    split: Split,
) -> Result<f64> {
    let cs = &data.cochains;
    let logits = base_infer_logits(
        &cs.vertex.data,
        &cs.edge.data,
        &cs.face.data,
        &data.base_structure(),
        params,
        &mut MultiplyCounter::default(),
    )?;
    split_accuracy(&logits.argmax_rows(), bundle, split)
}

fn model_dims(data: &SimplicialData, cfg: &TrainConfig, classes: usize) -> ModelDims {
    let d = data.cochains.vertex.dim();
    ModelDims {
        vertex_in: d,
        edge_in: d,
        face_in: d,
        hidden: cfg.hidden,
        classes,
    }
}

/// Training stream, kept apart from the initialization stream.
fn training_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn diverged(epoch: usize, e: Error, last: Option<&LossBreakdown>) -> Error {
    match e {
        Error::NonFinite { .. } => Error::Diverged {
            epoch,
            detail: match last {
                Some(l) => format!("{e}; previous epoch losses {l:?}"),
                None => e.to_string(),
            },
        },
        other => other,
    }
}

fn mean_breakdown(parts: &[LossBreakdown]) -> LossBreakdown {
    let k = parts.len() as f64;
    let mut m = LossBreakdown::default();
    for p in parts {
        m.l_v += p.l_v / k;
        m.l_e += p.l_e / k;
        m.l_f += p.l_f / k;
        m.ce += p.ce / k;
        m.total += p.total / k;
    }
    m
}

/// Tracks the best validation accuracy and the parameters that achieved it.
struct Selector<P> {
    best: Option<(f64, usize, P)>,
}

impl<P: Clone> Selector<P> {
    fn offer(&mut self, acc: f64, epoch: usize, params: &P) {
        if self.best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            self.best = Some((acc, epoch, params.clone()));
        }
    }

    fn finish(self, last: P, epochs: usize, history: History) -> TrainOutcome<P> {
        match self.best {
            Some((acc, epoch, params)) => TrainOutcome {
                params,
                history,
                best_epoch: epoch,
                best_val: Some(acc),
            },
            None => TrainOutcome {
                params: last,
                history,
                best_epoch: epochs,
                best_val: None,
            },
        }
    }
}

fn should_eval(cfg: &TrainConfig, epoch: usize) -> bool {
    epoch % cfg.eval_every == 0 || epoch == cfg.epochs
}

fn log_epoch(cfg: &TrainConfig, model: &str, r: &EpochRecord) {
    if cfg.log_every > 0 && (r.epoch % cfg.log_every == 0 || r.epoch == cfg.epochs) {
        let val = r.val_acc.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        eprintln!(
            "[{model}] epoch {:>4}  total {:.5}  ce {:.5}  l_v {:.4}  l_e {:.4}  l_f {:.4}  val {val}",
            r.epoch, r.loss.total, r.loss.ce, r.loss.l_v, r.loss.l_e, r.loss.l_f
        );
    }
}

/// Trains Topo-MLP with sampled contrastive batches plus cross-entropy on
/// the training nodes that land in each batch.
pub fn train(bundle: &GraphBundle, cfg: &TrainConfig) -> Result<TrainOutcome<TopoMlpParams<f32>>> {
    let data = SimplicialData::build(bundle, cfg.combiner)?;
    train_on(bundle, &data, cfg)
}

/// [`train`] on precomputed simplicial data for `bundle`.
pub fn train_on(
    bundle: &GraphBundle,
    data: &SimplicialData,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<TopoMlpParams<f32>>> {
    cfg.validate()?;
    bundle.validate()?;
    let sizes = BatchSizes::resolve(cfg, &data.complex)?;
    let labels = train_labels(bundle);
    let x0_full = &data.cochains.vertex.data;
    let has_val = (0..bundle.n).any(|i| bundle.splits[i] == Split::Val && bundle.labels[i] >= 0);

    let mut params = TopoMlpParams::<f32>::init(model_dims(data, cfg, bundle.classes), cfg.seed)?;
    let shapes: Vec<_> = params.tensors().iter().map(|m| m.shape()).collect();
    let mut adam = Adam::new(cfg.adam, &shapes);
    let mut rng = training_rng(cfg.seed);
    let mut history = History::default();
    let mut selector = Selector { best: None };

    for epoch in 1..=cfg.epochs {
        let mut parts = Vec::with_capacity(cfg.steps_per_epoch);
        let mut diag = HoncDiagnostics::default();
        for _ in 0..cfg.steps_per_epoch {
            let last = history.epochs.last().map(|r: &EpochRecord| &r.loss);
            let (p, d) = topo_step(data, &labels, sizes, cfg, &mut params, &mut adam, &mut rng)
                .map_err(|e| diverged(epoch, e, last))?;
            parts.push(p);
            diag += d;
        }
        let loss = mean_breakdown(&parts);
        if !loss.total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("loss {loss:?}"),
            });
        }
        let val_acc = if has_val && should_eval(cfg, epoch) {
            let acc = split_accuracy(&topo_infer_nodes(x0_full, &params)?, bundle, Split::Val)?;
            selector.offer(acc, epoch, &params);
            Some(acc)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            loss,
            val_acc,
            diagnostics: diag,
        };
        log_epoch(cfg, "topo", &record);
        history.epochs.push(record);
    }
    Ok(selector.finish(params, cfg.epochs, history))
}

fn topo_step(
    data: &SimplicialData,
    labels: &[Option<usize>],
    sizes: BatchSizes,
    cfg: &TrainConfig,
    params: &mut TopoMlpParams<f32>,
    adam: &mut Adam<f32>,
    rng: &mut ChaCha8Rng,
) -> Result<(LossBreakdown, HoncDiagnostics)> {
    let batch = sample_batch(data, sizes, cfg.honc.signed_b1, labels, rng)?;
    let mut honc = cfg.honc;
    if batch.edges.is_empty() {
        honc.beta_e = 0.0;
    }
    if batch.faces.is_empty() {
        honc.beta_f = 0.0;
    }

    let mut tape = Tape::<f32>::new();
    let vars = params.register(&mut tape);
    let x0 = tape.constant(batch.x0);
    let x1 = (honc.beta_e > 0.0).then(|| tape.constant(batch.x1));
    let x2 = (honc.beta_f > 0.0).then(|| tape.constant(batch.x2));
    let out = topo_forward(&mut tape, &vars, x0, x1, x2, cfg.dropout, true, rng)?;
    let inputs = LossInputs {
        z0: out.z0,
        z1: out.z1,
        z2: out.z2,
        y0: out.y0,
        a0: &batch.a0,
        b1: &batch.b1,
        b02: &batch.b02,
        ce_rows: &batch.ce_rows,
        ce_labels: &batch.ce_labels,
    };
    let (loss, parts, diag) = total_loss(&mut tape, &inputs, &honc)?;
    let grads = tape.backward(loss)?;
    let grads: Vec<Matrix<f32>> = vars
        .all()
        .iter()
        .zip(params.tensors())
        .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
        .collect();
    let grad_refs: Vec<&Matrix<f32>> = grads.iter().collect();
    adam.step(&mut params.tensors_mut(), &grad_refs)?;
    Ok((parts, diag))
}

/// Trains the message-passing baseline full-batch with cross-entropy only.
pub fn train_base(bundle: &GraphBundle, cfg: &TrainConfig) -> Result<TrainOutcome<BaseScnParams<f32>>> {
    let data = SimplicialData::build(bundle, cfg.combiner)?;
    train_base_on(bundle, &data, cfg)
}

/// [`train_base`] on precomputed simplicial data for `bundle`.
pub fn train_base_on(
    bundle: &GraphBundle,
    data: &SimplicialData,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<BaseScnParams<f32>>> {
    cfg.validate()?;
    bundle.validate()?;
    let labels = train_labels(bundle);
    let (rows, classes): (Vec<usize>, Vec<usize>) =
        labels.iter().enumerate().filter_map(|(i, l)| l.map(|l| (i, l))).unzip();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no labeled training nodes".into()));
    }
    let has_val = (0..bundle.n).any(|i| bundle.splits[i] == Split::Val && bundle.labels[i] >= 0);
    let structure = data.base_structure();
    let cs = &data.cochains;

    let mut params = BaseScnParams::<f32>::init(model_dims(data, cfg, bundle.classes), cfg.seed)?;
    let shapes: Vec<_> = params.tensors().iter().map(|m| m.shape()).collect();
    let mut adam = Adam::new(cfg.adam, &shapes);
    let mut rng = training_rng(cfg.seed);
    let mut history = History::default();
    let mut selector = Selector { best: None };

    for epoch in 1..=cfg.epochs {
        let mut parts = Vec::with_capacity(cfg.steps_per_epoch);
        for _ in 0..cfg.steps_per_epoch {
            let last = history.epochs.last().map(|r: &EpochRecord| &r.loss);
            let mut step = || -> Result<LossBreakdown> {
                let mut tape = Tape::<f32>::new();
                let vars = params.register(&mut tape);
                let x0 = tape.constant(cs.vertex.data.clone());
                let x1 = tape.constant(cs.edge.data.clone());
                let x2 = tape.constant(cs.face.data.clone());
                let y = base_forward(&mut tape, &vars, x0, x1, x2, &structure, cfg.dropout, true, &mut rng)?;
                let ce = tape.cross_entropy(y, &rows, &classes)?;
                let value = tape.scalar(ce) as f64;
                let grads = tape.backward(ce)?;
                let grads: Vec<Matrix<f32>> = vars
                    .all()
                    .iter()
                    .zip(params.tensors())
                    .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
                    .collect();
                let grad_refs: Vec<&Matrix<f32>> = grads.iter().collect();
                adam.step(&mut params.tensors_mut(), &grad_refs)?;
                Ok(LossBreakdown {
                    ce: value,
                    total: value,
                    ..LossBreakdown::default()
                })
            };
            parts.push(step().map_err(|e| diverged(epoch, e, last))?);
        }
        let loss = mean_breakdown(&parts);
        let val_acc = if has_val && should_eval(cfg, epoch) {
            let acc = evaluate_base_on(&params, data, bundle, Split::Val)?;
            selector.offer(acc, epoch, &params);
            Some(acc)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            loss,
            val_acc,
            diagnostics: HoncDiagnostics::default(),
        };
        log_epoch(cfg, "base", &record);
        history.epochs.push(record);
    }
    Ok(selector.finish(params, cfg.epochs, history))
}

/// Parameters of either model family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedParams {
    Topo(TopoMlpParams<f32>),
    Base(BaseScnParams<f32>),
}

impl TrainedParams {
    pub fn named(&self) -> Vec<(&'static str, &Matrix<f32>)> {
        match self {
            TrainedParams::Topo(p) => p.named(),
            TrainedParams::Base(p) => p.named(),
        }
    }

    /// Recognizes the family from the tensor names.
    pub fn from_named(tensors: Vec<(String, Matrix<f32>)>) -> Result<Self> {
        if tensors.iter().any(|(n, _)| n.starts_with("base.")) {
            Ok(TrainedParams::Base(BaseScnParams::from_named(tensors)?))
        } else {
            Ok(TrainedParams::Topo(TopoMlpParams::from_named(tensors)?))
        }
    }

    pub fn evaluate(&self, bundle: &GraphBundle, split: Split, combiner: Combiner) -> Result<f64> {
        match self {
            TrainedParams::Topo(p) => evaluate(p, bundle, split),
            TrainedParams::Base(p) => evaluate_base(p, bundle, split, combiner),
        }
    }
}

/// Trains `kind` and returns its selected parameters with the history.
pub fn fit(kind: ModelKind, bundle: &GraphBundle, cfg: &TrainConfig) -> Result<TrainOutcome<TrainedParams>> {
    fn wrap<P>(o: TrainOutcome<P>, f: fn(P) -> TrainedParams) -> TrainOutcome<TrainedParams> {
        TrainOutcome {
            params: f(o.params),
            history: o.history,
            best_epoch: o.best_epoch,
            best_val: o.best_val,
        }
    }
    match kind {
        ModelKind::Topo => Ok(wrap(train(bundle, cfg)?, TrainedParams::Topo)),
        ModelKind::Mlp => {
            let mut cfg = cfg.clone();
            cfg.honc.beta_v = 0.0;
            cfg.honc.beta_e = 0.0;
            cfg.honc.beta_f = 0.0;
            Ok(wrap(train(bundle, &cfg)?, TrainedParams::Topo))
        }
        ModelKind::Base => Ok(wrap(train_base(bundle, cfg)?, TrainedParams::Base)),
    }
}

/// Wall-clock statistics in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub runs: usize,
}

/// Times `forward` over `runs` calls after `warmup` untimed calls.
pub fn measure_inference<F>(mut forward: F, runs: usize, warmup: usize) -> Result<Timing>
where
    F: FnMut() -> Result<()>,
{
    if runs < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 timed runs, got {runs}")));
    }
    for _ in 0..warmup {
        forward()?;
    }
    let mut samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        forward()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    let mean = samples.iter().sum::<f64>() / runs as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    Ok(Timing {
        mean,
        std: var.sqrt(),
        runs,
    })
}
