//! On-disk graph bundles and the planted-partition generator.
//!
//! Bundle directory layout:
//!
//! - `meta`: `n=<int>`, `d=<int>`, `classes=<int>`, one per line
//! - `edges.tsv`: `u<TAB>v` per undirected edge, `u < v`, sorted, unique
//! - `features.bin`: `n·d` little-endian `f32`, row-major, no header
//! - `labels.tsv`: `node<TAB>class` per labeled node
//! - `splits.tsv`: `node<TAB>{train|val|test}`

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::complex::Graph;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphBundle {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub graph: Graph,
    /// Raw vertex features, `n × d`.
    pub features: Matrix<f32>,
    /// Class per node, `-1` when unlabeled.
    pub labels: Vec<i64>,
    pub splits: Vec<Split>,
}

impl GraphBundle {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidArgument(m));
        if self.graph.n_vertices() != self.n {
            return err(format!("graph has {} vertices, n={}", self.graph.n_vertices(), self.n));
        }
        if self.features.shape() != (self.n, self.d) {
            return err(format!("features are {:?}, expected ({}, {})", self.features.shape(), self.n, self.d));
        }
        if !self.features.is_finite() {
            return Err(Error::NonFinite { op: "features" });
        }
        if self.labels.len() != self.n || self.splits.len() != self.n {
            return err("label/split vectors do not cover every node".into());
        }
        for (i, &l) in self.labels.iter().enumerate() {
            if l < -1 || l >= self.classes as i64 {
                return err(format!("node {i} has label {l} outside [-1, {})", self.classes));
            }
            if self.splits[i] == Split::Train && l < 0 {
                return err(format!("training node {i} is unlabeled"));
            }
        }
        Ok(())
    }

    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.n).filter(|&i| self.splits[i] == split).collect()
    }
}

fn read_text(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

fn format_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Splits a two-column TSV line into trimmed fields.
fn two_fields<'a>(file: &str, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut it = line.split('\t');
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a.trim(), b.trim())),
        _ => Err(format_err(file, line_no, "expected exactly two tab-separated fields")),
    }
}

fn parse_num<T: FromStr>(file: &str, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| format_err(file, line, format!("cannot parse `{s}` as a number")))
}

fn parse_meta(text: &str) -> Result<(usize, usize, usize)> {
    let (mut n, mut d, mut c) = (None, None, None);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format_err("meta", line_no, "expected key=value"));
        };
        let v: usize = parse_num("meta", line_no, v.trim())?;
        let slot = match k.trim() {
            "n" => &mut n,
            "d" => &mut d,
            "classes" => &mut c,
            other => return Err(format_err("meta", line_no, format!("unknown key `{other}`"))),
        };
        if slot.replace(v).is_some() {
            return Err(format_err("meta", line_no, "duplicate key"));
        }
    }
    match (n, d, c) {
        (Some(n), Some(d), Some(c)) => Ok((n, d, c)),
        _ => Err(format_err("meta", 0, "meta must define n, d and classes")),
    }
}

pub fn load_bundle(dir: &Path) -> Result<GraphBundle> {
    let (n, d, classes) = parse_meta(&read_text(dir, "meta")?)?;

    let mut edges = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (i, line) in read_text(dir, "edges.tsv")?.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = two_fields("edges.tsv", line_no, line)?;
        let u: usize = parse_num("edges.tsv", line_no, a)?;
        let v: usize = parse_num("edges.tsv", line_no, b)?;
        if u >= n || v >= n {
            return Err(format_err("edges.tsv", line_no, format!("node index out of range (n={n})")));
        }
        if u >= v {
            return Err(format_err("edges.tsv", line_no, "edge must satisfy u < v"));
        }
        if let Some(p) = prev {
            if (u, v) <= p {
                return Err(format_err("edges.tsv", line_no, "edges not sorted or duplicated"));
            }
        }
        prev = Some((u, v));
        edges.push((u, v));
    }
    let graph = Graph::new(n, edges)?;

    let feat_path = dir.join("features.bin");
    if !feat_path.exists() {
        return Err(Error::MissingFile(feat_path));
    }
    let raw = fs::read(&feat_path).map_err(|e| Error::io(&feat_path, e))?;
    if raw.len() != n * d * 4 {
        return Err(format_err(
            "features.bin",
            0,
            format!("{} bytes, expected {} for {n}x{d} f32", raw.len(), n * d * 4),
        ));
    }
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(format_err(
            "features.bin",
            0,
            format!("non-finite value at row {}, column {}", pos / d.max(1), pos % d.max(1)),
        ));
    }
    let features = Matrix::from_vec(n, d, values)?;

    let mut labels = vec![-1i64; n];
    for (i, line) in read_text(dir, "labels.tsv")?.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = two_fields("labels.tsv", line_no, line)?;
        let node: usize = parse_num("labels.tsv", line_no, a)?;
        let class: usize = parse_num("labels.tsv", line_no, b)?;
        if node >= n {
            return Err(format_err("labels.tsv", line_no, format!("node {node} out of range (n={n})")));
        }
        if class >= classes {
            return Err(format_err("labels.tsv", line_no, format!("class {class} out of range (classes={classes})")));
        }
        if labels[node] != -1 {
            return Err(format_err("labels.tsv", line_no, format!("node {node} labeled twice")));
        }
        labels[node] = class as i64;
    }

    let mut splits = vec![Split::None; n];
    for (i, line) in read_text(dir, "splits.tsv")?.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = two_fields("splits.tsv", line_no, line)?;
        let node: usize = parse_num("splits.tsv", line_no, a)?;
        if node >= n {
            return Err(format_err("splits.tsv", line_no, format!("node {node} out of range (n={n})")));
        }
        let tag: Split = b
            .parse()
            .map_err(|_| format_err("splits.tsv", line_no, format!("unknown split `{b}`")))?;
        if splits[node] != Split::None {
            return Err(format_err("splits.tsv", line_no, format!("node {node} assigned to two splits")));
        }
        if tag == Split::Train && labels[node] < 0 {
            return Err(format_err("splits.tsv", line_no, format!("training node {node} has no label")));
        }
        splits[node] = tag;
    }

    let bundle = GraphBundle {
        n,
        d,
        classes,
        graph,
        features,
        labels,
        splits,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn save_bundle(bundle: &GraphBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write(
        "meta",
        format!("n={}\nd={}\nclasses={}\n", bundle.n, bundle.d, bundle.classes).as_bytes(),
    )?;
    let mut edges = String::new();
    for &(u, v) in bundle.graph.edges() {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    write("edges.tsv", edges.as_bytes())?;
    let mut feats = Vec::with_capacity(bundle.n * bundle.d * 4);
    for v in bundle.features.as_slice() {
        feats.extend_from_slice(&v.to_le_bytes());
    }
    write("features.bin", &feats)?;
    let mut labels = String::new();
    let mut splits = String::new();
    for i in 0..bundle.n {
        if bundle.labels[i] >= 0 {
            let _ = writeln!(labels, "{i}\t{}", bundle.labels[i]);
        }
        if bundle.splits[i] != Split::None {
            let _ = writeln!(splits, "{i}\t{}", bundle.splits[i]);
        }
    }
    write("labels.tsv", labels.as_bytes())?;
    write("splits.tsv", splits.as_bytes())?;
    Ok(())
}

/// Parameters of [`make_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub communities: usize,
    pub nodes_per: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_noise: f64,
    /// Pure-noise feature columns appended after the community indicators.
    pub extra_dims: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            communities: 2,
            nodes_per: 15,
            p_in: 0.8,
            p_out: 0.05,
            feature_noise: 0.5,
            extra_dims: 0,
            seed: 0,
        }
    }
}

/// Planted-partition graph with community-indicator features plus Gaussian
/// noise; labels are communities and the split is a seeded 60/20/20 shuffle.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<GraphBundle> {
    if spec.communities < 2 || spec.nodes_per < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 communities of 2 nodes, got {}x{}",
            spec.communities, spec.nodes_per
        )));
    }
    let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
    if !prob_ok(spec.p_in) || !prob_ok(spec.p_out) || spec.p_in <= spec.p_out {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            spec.p_in, spec.p_out
        )));
    }
    if !(spec.feature_noise >= 0.0 && spec.feature_noise.is_finite()) {
        return Err(Error::InvalidArgument("feature_noise must be finite and >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.communities * spec.nodes_per;
    let community = |v: usize| v / spec.nodes_per;

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if community(u) == community(v) { spec.p_in } else { spec.p_out };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::new(n, edges)?;

    let d = spec.communities + spec.extra_dims;
    let noise = Normal::new(0.0, spec.feature_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut features = Matrix::zeros(n, d);
    for v in 0..n {
        for j in 0..d {
            let base = if j == community(v) { 1.0 } else { 0.0 };
            let eps = if spec.feature_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            features.set(v, j, (base + eps) as f32);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (n * 6) / 10;
    let n_val = (n * 2) / 10;
    let mut splits = vec![Split::Test; n];
    for (rank, &v) in order.iter().enumerate() {
        splits[v] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let bundle = GraphBundle {
        n,
        d,
        classes: spec.communities,
        graph,
        features,
        labels: (0..n).map(|v| community(v) as i64).collect(),
        splits,
    };
    bundle.validate()?;
    Ok(bundle)
}
