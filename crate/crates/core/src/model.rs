//! Topo-MLP and the message-passing simplicial baseline.
//!
//! Both models come in two forms: a tape-recording forward used for
//! training, and a tape-free inference path used for evaluation and timing.
//! The inference paths report how many matrix products they performed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{gelu, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};
use crate::sparse::SparseStructure;

/// Input widths of the three cochains, hidden width and class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vertex_in: usize,
    pub edge_in: usize,
    pub face_in: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl ModelDims {
    fn validate(&self) -> Result<()> {
        if [self.vertex_in, self.edge_in, self.face_in, self.hidden, self.classes].contains(&0) {
            return Err(Error::InvalidArgument(format!("zero model dimension in {self:?}")));
        }
        Ok(())
    }
}

/// Glorot-uniform matrix: entries in `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Matrix<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::lit(rng.random_range(-limit..=limit)))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized")
}

/// Counts matrix products performed by an inference path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MultiplyCounter {
    /// Feature and structure products before the classifier.
    pub hidden: usize,
    /// Classifier products.
    pub head: usize,
}

/// Per-dimension two-layer encoders into a shared embedding space, plus a
/// vertex classifier on top of the vertex embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoMlpParams<T> {
    pub vertex_in: Matrix<T>,
    pub vertex_out: Matrix<T>,
    pub edge_in: Matrix<T>,
    pub edge_out: Matrix<T>,
    pub face_in: Matrix<T>,
    pub face_out: Matrix<T>,
    pub classifier: Matrix<T>,
}

const TOPO_NAMES: [&str; 7] = [
    "vertex.in",
    "vertex.out",
    "edge.in",
    "edge.out",
    "face.in",
    "face.out",
    "classifier",
];

impl<T: Real> TopoMlpParams<T> {
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = dims.hidden;
        Ok(Self {
            vertex_in: glorot_uniform(&mut rng, dims.vertex_in, h),
            vertex_out: glorot_uniform(&mut rng, h, h),
            edge_in: glorot_uniform(&mut rng, dims.edge_in, h),
            edge_out: glorot_uniform(&mut rng, h, h),
            face_in: glorot_uniform(&mut rng, dims.face_in, h),
            face_out: glorot_uniform(&mut rng, h, h),
            classifier: glorot_uniform(&mut rng, h, dims.classes),
        })
    }

    pub fn named(&self) -> Vec<(&'static str, &Matrix<T>)> {
        TOPO_NAMES.iter().copied().zip(self.tensors()).collect()
    }

    pub fn tensors(&self) -> [&Matrix<T>; 7] {
        [
            &self.vertex_in,
            &self.vertex_out,
            &self.edge_in,
            &self.edge_out,
            &self.face_in,
            &self.face_out,
            &self.classifier,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 7] {
        [
            &mut self.vertex_in,
            &mut self.vertex_out,
            &mut self.edge_in,
            &mut self.edge_out,
            &mut self.face_in,
            &mut self.face_out,
            &mut self.classifier,
        ]
    }

    pub fn from_named(tensors: Vec<(String, Matrix<T>)>) -> Result<Self> {
        let mut slots: [Option<Matrix<T>>; 7] = Default::default();
        fill_slots(&TOPO_NAMES, tensors, &mut slots)?;
        let [a, b, c, d, e, f, g] = slots.map(Option::unwrap);
        let p = Self {
            vertex_in: a,
            vertex_out: b,
            edge_in: c,
            edge_out: d,
            face_in: e,
            face_out: f,
            classifier: g,
        };
        let h = p.vertex_out.rows();
        let consistent = p.vertex_in.cols() == h
            && p.edge_in.cols() == h
            && p.face_in.cols() == h
            && [&p.vertex_out, &p.edge_out, &p.face_out]
                .iter()
                .all(|m| m.shape() == (h, h))
            && p.classifier.rows() == h;
        if !consistent {
            return Err(Error::Checkpoint("inconsistent Topo-MLP tensor shapes".into()));
        }
        Ok(p)
    }

    pub fn register(&self, tape: &mut Tape<T>) -> TopoVars {
        TopoVars {
            vertex_in: tape.param(self.vertex_in.clone()),
            vertex_out: tape.param(self.vertex_out.clone()),
            edge_in: tape.param(self.edge_in.clone()),
            edge_out: tape.param(self.edge_out.clone()),
            face_in: tape.param(self.face_in.clone()),
            face_out: tape.param(self.face_out.clone()),
            classifier: tape.param(self.classifier.clone()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.vertex_out.rows()
    }

    pub fn classes(&self) -> usize {
        self.classifier.cols()
    }
}

fn fill_slots<T, const N: usize>(
    names: &[&str; N],
    tensors: Vec<(String, Matrix<T>)>,
    slots: &mut [Option<Matrix<T>>; N],
) -> Result<()> {
    for (name, m) in tensors {
        let Some(i) = names.iter().position(|n| *n == name) else {
            return Err(Error::Checkpoint(format!("unexpected tensor `{name}`")));
        };
        if slots[i].replace(m).is_some() {
            return Err(Error::Checkpoint(format!("tensor `{name}` appears twice")));
        }
    }
    if let Some(i) = slots.iter().position(Option::is_none) {
        return Err(Error::Checkpoint(format!("missing tensor `{}`", names[i])));
    }
    Ok(())
}

/// Tape handles of [`TopoMlpParams`], same field order.
#[derive(Debug, Clone, Copy)]
pub struct TopoVars {
    pub vertex_in: Var,
    pub vertex_out: Var,
    pub edge_in: Var,
    pub edge_out: Var,
    pub face_in: Var,
    pub face_out: Var,
    pub classifier: Var,
}

impl TopoVars {
    pub fn all(&self) -> [Var; 7] {
        [
            self.vertex_in,
            self.vertex_out,
            self.edge_in,
            self.edge_out,
            self.face_in,
            self.face_out,
            self.classifier,
        ]
    }
}

/// Embeddings and vertex logits produced by [`topo_forward`]. Edge and face
/// embeddings are absent when their inputs were not supplied.
#[derive(Debug, Clone, Copy)]
pub struct TopoOutputs {
    pub z0: Var,
    pub z1: Option<Var>,
    pub z2: Option<Var>,
    pub y0: Var,
}

fn encode<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    x: Var,
    w_in: Var,
    w_out: Var,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let h = tape.matmul(x, w_in)?;
    let h = tape.gelu(h)?;
    let h = tape.dropout(h, dropout, training, rng)?;
    tape.matmul(h, w_out)
}

/// `X^{k,1} = dropout(gelu(X^k W^{k,in}))`, `Z^k = X^{k,1} W^{k,out}`,
/// `Y^0 = Z^0 W^{cls}`. No structure matrix is read.
#[allow(clippy::too_many_arguments)]
pub fn topo_forward<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    p: &TopoVars,
    x0: Var,
    x1: Option<Var>,
    x2: Option<Var>,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<TopoOutputs> {
    let z0 = encode(tape, x0, p.vertex_in, p.vertex_out, dropout, training, rng)?;
    let z1 = x1
        .map(|x| encode(tape, x, p.edge_in, p.edge_out, dropout, training, rng))
        .transpose()?;
    let z2 = x2
        .map(|x| encode(tape, x, p.face_in, p.face_out, dropout, training, rng))
        .transpose()?;
    let y0 = tape.matmul(z0, p.classifier)?;
    Ok(TopoOutputs { z0, z1, z2, y0 })
}

fn gelu_in_place<T: Real>(m: &mut Matrix<T>) {
    m.as_mut_slice().iter_mut().for_each(|v| *v = gelu(*v));
}

/// Eval-mode vertex logits from vertex features alone.
pub fn topo_infer_logits<T: Real>(
    x0: &Matrix<T>,
    p: &TopoMlpParams<T>,
    counter: &mut MultiplyCounter,
) -> Result<Matrix<T>> {
    let mut h = x0.matmul(&p.vertex_in)?;
    gelu_in_place(&mut h);
    let z0 = h.matmul(&p.vertex_out)?;
    counter.hidden += 2;
    let y0 = z0.matmul(&p.classifier)?;
    counter.head += 1;
    Ok(y0)
}

/// Predicted class per vertex. Depends on `x0` and `p` only.
pub fn topo_infer_nodes<T: Real>(x0: &Matrix<T>, p: &TopoMlpParams<T>) -> Result<Vec<usize>> {
    let mut counter = MultiplyCounter::default();
    Ok(topo_infer_logits(x0, p, &mut counter)?.argmax_rows())
}

/// Weights of the baseline: one projection per cochain into a shared hidden
/// width, then a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseScnParams<T> {
    pub vertex: Matrix<T>,
    pub edge: Matrix<T>,
    pub face: Matrix<T>,
    pub classifier: Matrix<T>,
}

const BASE_NAMES: [&str; 4] = ["base.vertex", "base.edge", "base.face", "base.classifier"];

impl<T: Real> BaseScnParams<T> {
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = dims.hidden;
        Ok(Self {
            vertex: glorot_uniform(&mut rng, dims.vertex_in, h),
            edge: glorot_uniform(&mut rng, dims.edge_in, h),
            face: glorot_uniform(&mut rng, dims.face_in, h),
            classifier: glorot_uniform(&mut rng, h, dims.classes),
        })
    }

    pub fn named(&self) -> Vec<(&'static str, &Matrix<T>)> {
        BASE_NAMES.iter().copied().zip(self.tensors()).collect()
    }

    pub fn tensors(&self) -> [&Matrix<T>; 4] {
        [&self.vertex, &self.edge, &self.face, &self.classifier]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 4] {
        [
            &mut self.vertex,
            &mut self.edge,
            &mut self.face,
            &mut self.classifier,
        ]
    }

    pub fn from_named(tensors: Vec<(String, Matrix<T>)>) -> Result<Self> {
        let mut slots: [Option<Matrix<T>>; 4] = Default::default();
        fill_slots(&BASE_NAMES, tensors, &mut slots)?;
        let [a, b, c, d] = slots.map(Option::unwrap);
        let h = a.cols();
        if b.cols() != h || c.cols() != h || d.rows() != h {
            return Err(Error::Checkpoint("inconsistent base model tensor shapes".into()));
        }
        Ok(Self {
            vertex: a,
            edge: b,
            face: c,
            classifier: d,
        })
    }

    pub fn register(&self, tape: &mut Tape<T>) -> BaseVars {
        BaseVars {
            vertex: tape.param(self.vertex.clone()),
            edge: tape.param(self.edge.clone()),
            face: tape.param(self.face.clone()),
            classifier: tape.param(self.classifier.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BaseVars {
    pub vertex: Var,
    pub edge: Var,
    pub face: Var,
    pub classifier: Var,
}

impl BaseVars {
    pub fn all(&self) -> [Var; 4] {
        [self.vertex, self.edge, self.face, self.classifier]
    }
}

/// Structure matrices consumed by the baseline: `A_0` (n×n), `B_1` (n×m)
/// and `B_{0,2}` (n×t).
#[derive(Debug, Clone)]
pub struct BaseStructure {
    pub a0: Arc<SparseStructure>,
    pub b1: Arc<SparseStructure>,
    pub b02: Arc<SparseStructure>,
}

impl BaseStructure {
    fn check(&self, x0: (usize, usize), x1: (usize, usize), x2: (usize, usize)) -> Result<()> {
        let n = x0.0;
        let ok = self.a0.shape() == (n, n)
            && self.b1.shape() == (n, x1.0)
            && self.b02.shape() == (n, x2.0);
        if !ok {
            return Err(Error::shape(
                "base_forward",
                format!(
                    "A0 {:?}, B1 {:?}, B02 {:?} for cochains with {}/{}/{} rows",
                    self.a0.shape(),
                    self.b1.shape(),
                    self.b02.shape(),
                    x0.0,
                    x1.0,
                    x2.0
                ),
            ));
        }
        Ok(())
    }
}

/// `head(dropout(gelu(A0·X0·W0 + B1·X1·W1 + B02·X2·W2)))` on the tape.
#[allow(clippy::too_many_arguments)]
pub fn base_forward<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    p: &BaseVars,
    x0: Var,
    x1: Var,
    x2: Var,
    s: &BaseStructure,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    s.check(tape.shape(x0), tape.shape(x1), tape.shape(x2))?;
    let v = tape.matmul(x0, p.vertex)?;
    let v = tape.spmm(&s.a0, v)?;
    let e = tape.matmul(x1, p.edge)?;
    let e = tape.spmm(&s.b1, e)?;
    let f = tape.matmul(x2, p.face)?;
    let f = tape.spmm(&s.b02, f)?;
    let h = tape.add(v, e)?;
    let h = tape.add(h, f)?;
    let h = tape.gelu(h)?;
    let h = tape.dropout(h, dropout, training, rng)?;
    tape.matmul(h, p.classifier)
}

/// Eval-mode baseline logits.
pub fn base_infer_logits<T: Real>(
    x0: &Matrix<T>,
    x1: &Matrix<T>,
    x2: &Matrix<T>,
    s: &BaseStructure,
    p: &BaseScnParams<T>,
    counter: &mut MultiplyCounter,
) -> Result<Matrix<T>> {
    s.check(x0.shape(), x1.shape(), x2.shape())?;
    let mut h = s.a0.spmm(&x0.matmul(&p.vertex)?)?;
    h.add_assign(&s.b1.spmm(&x1.matmul(&p.edge)?)?);
    h.add_assign(&s.b02.spmm(&x2.matmul(&p.face)?)?);
    counter.hidden += 6;
    gelu_in_place(&mut h);
    let out = h.matmul(&p.classifier)?;
    counter.head += 1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{adjacency_0, boundary_1, build_clique_complex, incidence_0_2, Graph};

    fn dims(d: usize, h: usize, c: usize) -> ModelDims {
        ModelDims {
            vertex_in: d,
            edge_in: d,
            face_in: d,
            hidden: h,
            classes: c,
        }
    }

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix<f64> {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = TopoMlpParams::<f32>::init(dims(5, 8, 3), 3).unwrap();
        let b = TopoMlpParams::<f32>::init(dims(5, 8, 3), 3).unwrap();
        assert_eq!(a, b);
        let limit = (6.0f32 / 13.0).sqrt();
        assert!(a.vertex_in.as_slice().iter().all(|v| v.abs() <= limit));
        assert!(TopoMlpParams::<f32>::init(dims(0, 8, 3), 3).is_err());
        assert!(BaseScnParams::<f32>::init(dims(5, 8, 0), 3).is_err());
    }

    #[test]
    fn glorot_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m: Matrix<f64> = glorot_uniform(&mut rng, 200, 500);
        let limit2 = 6.0 / 700.0;
        let n = m.as_slice().len() as f64;
        let mean = m.sum() / n;
        let var = m.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!((var - limit2 / 3.0).abs() < 0.05 * limit2 / 3.0, "var {var}");
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let mut p = TopoMlpParams::<f32>::init(dims(3, 4, 2), 1).unwrap();
        p.tensors_mut().into_iter().for_each(|m| *m = Matrix::zeros(m.rows(), m.cols()));
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let x0 = tape.constant(Matrix::filled(4, 3, 1.0));
        let x1 = tape.constant(Matrix::filled(5, 3, 1.0));
        let x2 = tape.constant(Matrix::filled(2, 3, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = topo_forward(&mut tape, &vars, x0, Some(x1), Some(x2), 0.6, true, &mut rng).unwrap();
        for v in [out.z0, out.z1.unwrap(), out.z2.unwrap(), out.y0] {
            assert_eq!(tape.value(v).max_abs(), 0.0);
        }
        assert_eq!(tape.shape(out.z0), (4, 4));
        assert_eq!(tape.shape(out.z1.unwrap()), (5, 4));
        assert_eq!(tape.shape(out.y0), (4, 2));
    }

    #[test]
    fn eval_forward_matches_hand_pipeline() {
        let p = TopoMlpParams::<f64>::init(dims(3, 5, 2), 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_matrix(&mut rng, 4, 3);

        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let x0 = tape.constant(x.clone());
        let out = topo_forward(&mut tape, &vars, x0, None, None, 0.6, false, &mut rng).unwrap();

        // independent recomputation with explicit loops
        let mut expect = Matrix::<f64>::zeros(4, 2);
        for r in 0..4 {
            let mut h = vec![0.0; 5];
            for (j, hj) in h.iter_mut().enumerate() {
                let s: f64 = (0..3).map(|k| x.get(r, k) * p.vertex_in.get(k, j)).sum();
                *hj = 0.5 * s * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (s + 0.044715 * s.powi(3))).tanh());
            }
            let z: Vec<f64> = (0..5)
                .map(|j| (0..5).map(|k| h[k] * p.vertex_out.get(k, j)).sum())
                .collect();
            for c in 0..2 {
                expect.set(r, c, (0..5).map(|k| z[k] * p.classifier.get(k, c)).sum());
            }
        }
        let y = tape.value(out.y0);
        for (a, b) in y.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
        let mut counter = MultiplyCounter::default();
        let y2 = topo_infer_logits(&x, &p, &mut counter).unwrap();
        assert_eq!(&y2, y);
        assert_eq!(counter, MultiplyCounter { hidden: 2, head: 1 });
    }

    #[test]
    fn hand_set_weights_predict_by_argmax() {
        let p = TopoMlpParams::<f64> {
            vertex_in: Matrix::identity(2),
            vertex_out: Matrix::identity(2),
            edge_in: Matrix::identity(2),
            edge_out: Matrix::identity(2),
            face_in: Matrix::identity(2),
            face_out: Matrix::identity(2),
            classifier: Matrix::identity(2),
        };
        // gelu is increasing on positives, so the larger coordinate wins
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [0.5, 0.7]]);
        assert_eq!(topo_infer_nodes(&x, &p).unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn base_forward_matches_dense_oracle() {
        let c = build_clique_complex(&Graph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap());
        let s = BaseStructure {
            a0: Arc::new(adjacency_0(&c)),
            b1: Arc::new(boundary_1(&c)),
            b02: Arc::new(incidence_0_2(&c)),
        };
        let p = BaseScnParams::<f64>::init(dims(2, 4, 3), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = rand_matrix(&mut rng, 3, 2);
        let x1 = rand_matrix(&mut rng, 3, 2);
        let x2 = rand_matrix(&mut rng, 1, 2);

        let pre = s
            .a0
            .to_dense::<f64>()
            .matmul(&x0)
            .unwrap()
            .matmul(&p.vertex)
            .unwrap()
            .add(&s.b1.to_dense::<f64>().matmul(&x1).unwrap().matmul(&p.edge).unwrap())
            .unwrap()
            .add(&s.b02.to_dense::<f64>().matmul(&x2).unwrap().matmul(&p.face).unwrap())
            .unwrap();
        let oracle = pre.map(gelu).matmul(&p.classifier).unwrap();

        let mut counter = MultiplyCounter::default();
        let got = base_infer_logits(&x0, &x1, &x2, &s, &p, &mut counter).unwrap();
        for (a, b) in got.as_slice().iter().zip(oracle.as_slice()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert_eq!(counter, MultiplyCounter { hidden: 6, head: 1 });

        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let (v0, v1, v2) = (tape.constant(x0), tape.constant(x1), tape.constant(x2));
        let logits = base_forward(&mut tape, &vars, v0, v1, v2, &s, 0.5, false, &mut rng).unwrap();
        assert_eq!(tape.value(logits), &got);
    }

    #[test]
    fn base_with_zero_structure_is_head_of_gelu_zero() {
        let s = BaseStructure {
            a0: Arc::new(SparseStructure::empty(3, 3)),
            b1: Arc::new(SparseStructure::empty(3, 2)),
            b02: Arc::new(SparseStructure::empty(3, 1)),
        };
        let p = BaseScnParams::<f32>::init(dims(2, 4, 3), 5).unwrap();
        let mut counter = MultiplyCounter::default();
        let out = base_infer_logits(
            &Matrix::filled(3, 2, 1.0),
            &Matrix::filled(2, 2, 1.0),
            &Matrix::filled(1, 2, 1.0),
            &s,
            &p,
            &mut counter,
        )
        .unwrap();
        assert_eq!(out.max_abs(), 0.0);
        let bad = base_infer_logits(
            &Matrix::filled(3, 2, 1.0),
            &Matrix::filled(4, 2, 1.0),
            &Matrix::filled(1, 2, 1.0),
            &s,
            &p,
            &mut counter,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn named_round_trip() {
        let p = TopoMlpParams::<f32>::init(dims(3, 4, 2), 1).unwrap();
        let named: Vec<(String, Matrix<f32>)> =
            p.named().into_iter().map(|(n, m)| (n.to_string(), m.clone())).collect();
        assert_eq!(TopoMlpParams::from_named(named.clone()).unwrap(), p);
        assert!(TopoMlpParams::from_named(named[1..].to_vec()).is_err());
        assert!(BaseScnParams::<f32>::from_named(named).is_err());
    }
}
