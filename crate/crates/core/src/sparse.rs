//! Sparse structure matrices (adjacency, boundary, incidence, Laplacians).
//!
//! Entries are kept in compressed-row form sorted by `(row, col)`, which is
//! also the canonical coordinate-list order used for text export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseStructure {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f32>,
}

impl SparseStructure {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from coordinate triplets. Explicit zeros are dropped; duplicate
    /// coordinates and out-of-range indices are rejected.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, f32)>,
    ) -> Result<Self> {
        let mut triplets: Vec<(usize, usize, f32)> = entries.into_iter().collect();
        for &(r, c, v) in &triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::shape(
                    "SparseStructure",
                    format!("entry ({r}, {c}) outside {n_rows}x{n_cols}"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    op: "SparseStructure",
                });
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = triplets.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate coordinate ({}, {})",
                w[0].0, w[0].1
            )));
        }
        triplets.retain(|t| t.2 != 0.0);

        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(r, _, _) in &triplets {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of one row as `(col, value)` pairs, ascending by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All nonzeros in `(row, col)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f32)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut row_ptr = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut next = row_ptr.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.entries() {
            let slot = next[c];
            col_idx[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.abs());
        out
    }

    /// Sparse product; exact cancellations are dropped from the result.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::shape(
                "sparse matmul",
                format!("{:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        let mut triplets = Vec::new();
        for r in 0..self.n_rows {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    *acc.entry(c).or_default() += a as f64 * b as f64;
                }
            }
            triplets.extend(
                acc.into_iter()
                    .filter(|&(_, v)| v != 0.0)
                    .map(|(c, v)| (r, c, v as f32)),
            );
        }
        Self::from_triplets(self.n_rows, other.n_cols, triplets)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "sparse add",
                format!("{:?} + {:?}", self.shape(), other.shape()),
            ));
        }
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in self.entries().chain(other.entries()) {
            *acc.entry((r, c)).or_default() += v as f64;
        }
        Self::from_triplets(
            self.n_rows,
            self.n_cols,
            acc.into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|((r, c), v)| (r, c, v as f32)),
        )
    }

    /// Restricts to the given rows and columns, in the given order.
    ///
    /// Output entry `(a, b)` equals `self[rows[a]][cols[b]]`; structure that
    /// touches an unselected row or column is dropped.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (b, &c) in cols.iter().enumerate() {
            if c >= self.n_cols {
                return Err(Error::shape("submatrix", format!("column {c} out of range")));
            }
            col_map[c] = b;
        }
        let mut triplets = Vec::new();
        for (a, &r) in rows.iter().enumerate() {
            if r >= self.n_rows {
                return Err(Error::shape("submatrix", format!("row {r} out of range")));
            }
            for (c, v) in self.row(r) {
                let b = col_map[c];
                if b != usize::MAX {
                    triplets.push((a, b, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), triplets)
    }

    pub fn to_dense<T: Real>(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.entries() {
            out.set(r, c, T::lit(v as f64));
        }
        out
    }

    /// Builds from a dense matrix, keeping nonzeros.
    pub fn from_dense<T: Real>(m: &Matrix<T>) -> Result<Self> {
        let mut triplets = Vec::new();
        for r in 0..m.rows() {
            for (c, v) in m.row(r).iter().enumerate() {
                if !v.is_zero() {
                    triplets.push((r, c, v.to_f32().unwrap_or(f32::NAN)));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), triplets)
    }

    /// `self · x` for a dense right-hand side.
    pub fn spmm<T: Real>(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if self.n_cols != x.rows() {
            return Err(Error::shape(
                "spmm",
                format!("{:?} x {:?}", self.shape(), x.shape()),
            ));
        }
        let d = x.cols();
        let mut out = Matrix::zeros(self.n_rows, d);
        for r in 0..self.n_rows {
            let dst = out.row_mut(r);
            for (c, v) in self.row(r) {
                let v = T::lit(v as f64);
                for (o, &xi) in dst.iter_mut().zip(x.row(c)) {
                    *o = *o + v * xi;
                }
            }
        }
        Ok(out)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v as f64).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (_, c, v) in self.entries() {
            out[c] += v as f64;
        }
        out
    }

    /// Coordinate-list text: one `row<TAB>col<TAB>value` line per nonzero,
    /// sorted by `(row, col)`.
    pub fn to_coo_text(&self) -> String {
        let mut s = String::new();
        for (r, c, v) in self.entries() {
            let _ = writeln!(s, "{r}\t{c}\t{v}");
        }
        s
    }
}
