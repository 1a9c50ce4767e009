#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use topomlp::complex::Graph;
use topomlp::data::{make_synthetic, GraphBundle, SyntheticSpec};
use topomlp::Matrix;

/// Erdős–Rényi graph on `n` vertices with edge probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Two planted communities whose features are nearly one-hot in the label.
pub fn separable_bundle(seed: u64) -> GraphBundle {
    make_synthetic(&SyntheticSpec {
        feature_noise: 0.1,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

/// Writes a bundle by hand, bypassing `save_bundle`.
pub fn write_fixture(
    dir: &Path,
    n: usize,
    edges: &[(usize, usize)],
    features: &[f32],
    labels: &[(usize, usize)],
    splits: &[(usize, &str)],
    classes: usize,
) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let d = features.len() / n;
    fs::write(dir.join("meta"), format!("n={n}\nd={d}\nclasses={classes}\n")).unwrap();
    let edges: String = edges.iter().map(|(u, v)| format!("{u}\t{v}\n")).collect();
    fs::write(dir.join("edges.tsv"), edges).unwrap();
    let bytes: Vec<u8> = features.iter().flat_map(|f| f.to_le_bytes()).collect();
    fs::write(dir.join("features.bin"), bytes).unwrap();
    let labels: String = labels.iter().map(|(i, c)| format!("{i}\t{c}\n")).collect();
    fs::write(dir.join("labels.tsv"), labels).unwrap();
    let splits: String = splits.iter().map(|(i, s)| format!("{i}\t{s}\n")).collect();
    fs::write(dir.join("splits.tsv"), splits).unwrap();
    dir.to_path_buf()
}

/// Triangle 0-1-2 with one train, one val and one test node.
pub fn k3_fixture(dir: &Path) -> PathBuf {
    write_fixture(
        dir,
        3,
        &[(0, 1), (0, 2), (1, 2)],
        &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        &[(0, 0), (1, 1), (2, 0)],
        &[(0, "train"), (1, "val"), (2, "test")],
        2,
    )
}

/// Four-cycle: four edges and no triangle.
pub fn square_fixture(dir: &Path) -> PathBuf {
    write_fixture(
        dir,
        4,
        &[(0, 1), (0, 3), (1, 2), (2, 3)],
        &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
        &[(0, 0), (1, 1), (2, 0), (3, 1)],
        &[(0, "train"), (1, "train"), (2, "val"), (3, "test")],
        2,
    )
}
