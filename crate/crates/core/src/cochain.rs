//! Feature matrices attached to simplices, and the lifting of vertex
//! features to edges and triangles.

use std::fmt;
use std::str::FromStr;

use crate::complex::SimplicialComplex2;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Vertex = 0,
    Edge = 1,
    Face = 2,
}

/// Row `i` holds the features of the `i`-th simplex at `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub level: Level,
    pub data: Matrix<f32>,
}

impl Cochain {
    pub fn new(level: Level, data: Matrix<f32>, c: &SimplicialComplex2) -> Result<Self> {
        let expected = c.count(level as usize);
        if data.rows() != expected {
            return Err(Error::shape(
                "Cochain",
                format!("{} rows for {expected} simplices at level {level:?}", data.rows()),
            ));
        }
        if !data.is_finite() {
            return Err(Error::NonFinite { op: "Cochain" });
        }
        Ok(Self { level, data })
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

/// Elementwise symmetric reduction used to lift vertex features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combiner {
    Max,
    Min,
    #[default]
    Mean,
    Prod,
}

impl Combiner {
    fn fold(self, rows: &[&[f32]], out: &mut [f32]) {
        out.copy_from_slice(rows[0]);
        for r in &rows[1..] {
            for (o, &v) in out.iter_mut().zip(r.iter()) {
                *o = match self {
                    Combiner::Max => o.max(v),
                    Combiner::Min => o.min(v),
                    Combiner::Mean => *o + v,
                    Combiner::Prod => *o * v,
                };
            }
        }
        if self == Combiner::Mean {
            let k = rows.len() as f32;
            out.iter_mut().for_each(|o| *o /= k);
        }
    }
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Combiner::Max),
            "min" => Ok(Combiner::Min),
            "mean" => Ok(Combiner::Mean),
            "prod" => Ok(Combiner::Prod),
            other => Err(Error::Config(format!(
                "unknown combiner `{other}` (expected max|min|mean|prod)"
            ))),
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::Max => "max",
            Combiner::Min => "min",
            Combiner::Mean => "mean",
            Combiner::Prod => "prod",
        })
    }
}

fn check_vertex_rows(x0: &Cochain, c: &SimplicialComplex2) -> Result<()> {
    if x0.level != Level::Vertex || x0.data.rows() != c.n_vertices() {
        return Err(Error::shape(
            "lift",
            format!(
                "vertex cochain has {} rows, complex has {} vertices",
                x0.data.rows(),
                c.n_vertices()
            ),
        ));
    }
    Ok(())
}

pub fn lift_edge_features(x0: &Cochain, c: &SimplicialComplex2, h: Combiner) -> Result<Cochain> {
    check_vertex_rows(x0, c)?;
    let d = x0.dim();
    let mut out = Matrix::zeros(c.edges().len(), d);
    for (j, &(u, v)) in c.edges().iter().enumerate() {
        h.fold(&[x0.data.row(u), x0.data.row(v)], out.row_mut(j));
    }
    Ok(Cochain {
        level: Level::Edge,
        data: out,
    })
}

pub fn lift_face_features(x0: &Cochain, c: &SimplicialComplex2, h: Combiner) -> Result<Cochain> {
    check_vertex_rows(x0, c)?;
    let d = x0.dim();
    let mut out = Matrix::zeros(c.triangles().len(), d);
    for (j, &(u, v, w)) in c.triangles().iter().enumerate() {
        h.fold(
            &[x0.data.row(u), x0.data.row(v), x0.data.row(w)],
            out.row_mut(j),
        );
    }
    Ok(Cochain {
        level: Level::Face,
        data: out,
    })
}

/// Scales each row to unit L1 norm; all-zero rows stay zero.
pub fn row_l1_normalize(x: &Matrix<f32>) -> Matrix<f32> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let norm: f32 = row.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

/// Vertex, edge and face cochains for one complex.
#[derive(Debug, Clone)]
pub struct CochainSet {
    pub vertex: Cochain,
    pub edge: Cochain,
    pub face: Cochain,
}

impl CochainSet {
    /// Row-normalizes the raw vertex features and lifts them with `h`.
    pub fn lift(raw_features: &Matrix<f32>, c: &SimplicialComplex2, h: Combiner) -> Result<Self> {
        let vertex = Cochain::new(Level::Vertex, row_l1_normalize(raw_features), c)?;
        let edge = lift_edge_features(&vertex, c, h)?;
        let face = lift_face_features(&vertex, c, h)?;
        Ok(Self { vertex, edge, face })
    }
}
