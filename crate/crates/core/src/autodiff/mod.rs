//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every forward op in execution order; [`Tape::backward`]
//! replays it in reverse. Scalar losses with awkward local structure
//! (cross-entropy, the contrastive column loss) are recorded as fused nodes
//! that carry their own local gradient.

mod adam;
mod checkpoint;

use std::sync::Arc;

use rand::Rng;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};
use crate::sparse::SparseStructure;

/// Norm floor used by [`Tape::row_l2_normalize`].
pub const NORMALIZE_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Spmm(Arc<SparseStructure>, Var),
    Gelu(Var),
    Dropout(Var, Vec<T>),
    RowNormalize(Var, Vec<T>),
    Add(Var, Var),
    Scale(Var, T),
    Hadamard(Var, Var),
    Sum(Var),
    Fused(Var, Matrix<T>),
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    consumed: bool,
    multiplies: usize,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient buffers indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    /// `None` when `v` does not influence the loss or is a constant.
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of the given shape when none flowed.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
            multiplies: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of matrix products (dense or sparse) recorded so far.
    pub fn multiplies(&self) -> usize {
        self.multiplies
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.get(0, 0)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Input that gradients do not flow into.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op_name: &'static str, value: Matrix<T>, op: Op<T>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::MatMulNT(a, b) | Op::Add(a, b) | Op::Hadamard(a, b) => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
            Op::Spmm(_, x)
            | Op::Gelu(x)
            | Op::Dropout(x, _)
            | Op::RowNormalize(x, _)
            | Op::Scale(x, _)
            | Op::Sum(x)
            | Op::Fused(x, _) => self.nodes[x.0].needs_grad,
        };
        Ok(self.push(value, op, needs_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.multiplies += 1;
        self.record("matmul", out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul_nt(self.value(b))?;
        self.multiplies += 1;
        self.record("matmul_nt", out, Op::MatMulNT(a, b))
    }

    /// Constant sparse structure times a dense value; only `x` receives gradient.
    pub fn spmm(&mut self, s: &Arc<SparseStructure>, x: Var) -> Result<Var> {
        let out = s.spmm(self.value(x))?;
        self.multiplies += 1;
        self.record("spmm", out, Op::Spmm(Arc::clone(s), x))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(gelu);
        self.record("gelu", out, Op::Gelu(x))
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`. Identity
    /// otherwise.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {p} outside [0, 1)"
            )));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = T::lit(1.0 / (1.0 - p));
        let input = self.value(x);
        let mask: Vec<T> = (0..input.as_slice().len())
            .map(|_| {
                if rng.random::<f64>() < p {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = input
            .as_slice()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let out = Matrix::from_vec(input.rows(), input.cols(), data)?;
        self.record("dropout", out, Op::Dropout(x, mask))
    }

    /// Divides each row by `max(‖row‖₂, 1e-12)`.
    pub fn row_l2_normalize(&mut self, x: Var) -> Result<Var> {
        let eps = T::lit(NORMALIZE_EPS);
        let input = self.value(x);
        let mut out = input.clone();
        let mut norms = Vec::with_capacity(input.rows());
        for r in 0..input.rows() {
            let n = input.row(r).iter().map(|&v| v * v).sum::<T>().sqrt().max(eps);
            out.row_mut(r).iter_mut().for_each(|v| *v = *v / n);
            norms.push(n);
        }
        self.record("row_l2_normalize", out, Op::RowNormalize(x, norms))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        self.record("add", out, Op::Add(a, b))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let out = self.value(x).scale(c);
        self.record("scale", out, Op::Scale(x, c))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "hadamard",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Matrix::from_vec(va.rows(), va.cols(), data)?;
        self.record("hadamard", out, Op::Hadamard(a, b))
    }

    /// Sum of all entries as a 1x1 value.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Matrix::filled(1, 1, self.value(x).sum());
        self.record("sum", out, Op::Sum(x))
    }

    /// Records a scalar function of `input` whose gradient with respect to
    /// `input` has already been computed.
    pub fn fused_scalar(
        &mut self,
        op_name: &'static str,
        input: Var,
        value: T,
        local_grad: Matrix<T>,
    ) -> Result<Var> {
        if local_grad.shape() != self.shape(input) {
            return Err(Error::shape(
                op_name,
                format!(
                    "local gradient {:?} for input {:?}",
                    local_grad.shape(),
                    self.shape(input)
                ),
            ));
        }
        if !local_grad.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.record(op_name, Matrix::filled(1, 1, value), Op::Fused(input, local_grad))
    }

    /// Mean over `rows` of `−log softmax(logits[row])[label]`, using a
    /// shifted log-sum-exp. `labels[i]` is the class of `rows[i]`.
    pub fn cross_entropy(&mut self, logits: Var, rows: &[usize], labels: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "cross-entropy over an empty row mask".into(),
            ));
        }
        if rows.len() != labels.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} rows, {} labels", rows.len(), labels.len()),
            ));
        }
        let z = self.value(logits);
        let (n, classes) = z.shape();
        let inv = T::one() / T::lit(rows.len() as f64);
        let mut grad = Matrix::zeros(n, classes);
        let mut total = T::zero();
        for (&r, &y) in rows.iter().zip(labels) {
            if r >= n || y >= classes {
                return Err(Error::shape(
                    "cross_entropy",
                    format!("row {r} / label {y} outside {n}x{classes}"),
                ));
            }
            let row = z.row(r);
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let denom: T = row.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + denom.ln();
            total = total + (lse - row[y]);
            let g = grad.row_mut(r);
            for (j, &v) in row.iter().enumerate() {
                g[j] = g[j] + (v - lse).exp() * inv;
            }
            g[y] = g[y] - inv;
        }
        self.fused_scalar("cross_entropy", logits, total * inv, grad)
    }

    /// Reverse replay from the scalar `loss`. A tape can be replayed once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss has shape {:?}", self.shape(loss)),
            ));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                grads[idx] = Some(g);
                continue;
            }
            let contributions: Vec<(Var, Matrix<T>)> = match &node.op {
                Op::Leaf => Vec::new(),
                Op::MatMul(a, b) => {
                    let mut out = Vec::new();
                    if self.nodes[a.0].needs_grad {
                        out.push((*a, g.matmul_nt(self.value(*b))?));
                    }
                    if self.nodes[b.0].needs_grad {
                        out.push((*b, self.value(*a).matmul_tn(&g)?));
                    }
                    out
                }
                Op::MatMulNT(a, b) => {
                    let mut out = Vec::new();
                    if self.nodes[a.0].needs_grad {
                        out.push((*a, g.matmul(self.value(*b))?));
                    }
                    if self.nodes[b.0].needs_grad {
                        out.push((*b, g.matmul_tn(self.value(*a))?));
                    }
                    out
                }
                Op::Spmm(s, x) => vec![(*x, s.transpose().spmm(&g)?)],
                Op::Gelu(x) => {
                    let input = self.value(*x);
                    let data = input
                        .as_slice()
                        .iter()
                        .zip(g.as_slice())
                        .map(|(&v, &gv)| gelu_grad(v) * gv)
                        .collect();
                    vec![(*x, Matrix::from_vec(g.rows(), g.cols(), data)?)]
                }
                Op::Dropout(x, mask) => {
                    let data = g.as_slice().iter().zip(mask).map(|(&gv, &m)| gv * m).collect();
                    vec![(*x, Matrix::from_vec(g.rows(), g.cols(), data)?)]
                }
                Op::RowNormalize(x, norms) => {
                    let y = &node.value;
                    let eps = T::lit(NORMALIZE_EPS);
                    let mut dx = Matrix::zeros(g.rows(), g.cols());
                    for (r, &n) in norms.iter().enumerate() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dst = dx.row_mut(r);
                        if n > eps {
                            let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                            for ((d, &yv), &gv) in dst.iter_mut().zip(yr).zip(gr) {
                                *d = (gv - yv * dot) / n;
                            }
                        } else {
                            for (d, &gv) in dst.iter_mut().zip(gr) {
                                *d = gv / n;
                            }
                        }
                    }
                    vec![(*x, dx)]
                }
                Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
                Op::Scale(x, c) => vec![(*x, g.scale(*c))],
                Op::Hadamard(a, b) => {
                    let mul = |m: &Matrix<T>| -> Result<Matrix<T>> {
                        let data = g.as_slice().iter().zip(m.as_slice()).map(|(&x, &y)| x * y).collect();
                        Matrix::from_vec(g.rows(), g.cols(), data)
                    };
                    vec![(*a, mul(self.value(*b))?), (*b, mul(self.value(*a))?)]
                }
                Op::Sum(x) => {
                    let (r, c) = self.shape(*x);
                    vec![(*x, Matrix::filled(r, c, g.get(0, 0)))]
                }
                Op::Fused(x, local) => vec![(*x, local.scale(g.get(0, 0)))],
            };
            for (target, contrib) in contributions {
                if !self.nodes[target.0].needs_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
            grads[idx] = Some(g);
        }

        Ok(Gradients { grads })
    }
}

const GELU_CUBIC: f64 = 0.044715;

fn gelu_scale<T: Real>() -> T {
    T::lit((2.0 / std::f64::consts::PI).sqrt())
}

/// `0.5·x·(1 + tanh(u))` with `u = √(2/π)·(x + 0.044715·x³)`, evaluated as
/// the equivalent `x·σ(2u)`.
pub fn gelu<T: Real>(x: T) -> T {
    let u = gelu_scale::<T>() * (x + T::lit(GELU_CUBIC) * x * x * x);
    x / (T::one() + (-(u + u)).exp())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let c = gelu_scale::<T>();
    let u = c * (x + T::lit(GELU_CUBIC) * x * x * x);
    let s = T::one() / (T::one() + (-(u + u)).exp());
    let du = c * (T::one() + T::lit(3.0 * GELU_CUBIC) * x * x);
    s + x * s * (T::one() - s) * (du + du)
}

#[cfg(test)]
mod tests;
