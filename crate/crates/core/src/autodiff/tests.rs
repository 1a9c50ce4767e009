use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gradcheck::{numeric_gradient, relative_error};

fn random<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.random_range(-1.0..1.0)))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Runs `build` on a fresh tape with every input as a parameter and returns
/// (loss, gradients).
fn analytic<T: Real>(
    inputs: &[Matrix<T>],
    build: &dyn Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
) -> (T, Vec<Matrix<T>>) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let loss = build(&mut tape, &vars).unwrap();
    let value = tape.scalar(loss);
    let grads = tape.backward(loss).unwrap();
    let g = vars
        .iter()
        .zip(inputs)
        .map(|(&v, m)| grads.get_or_zeros(v, m.shape()))
        .collect();
    (value, g)
}

fn check<T: Real>(
    inputs: Vec<Matrix<T>>,
    step: f64,
    tol: f64,
    build: &dyn Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
) {
    let (_, grads) = analytic(&inputs, build);
    let loss = |p: &[Matrix<T>]| -> Result<T> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = p.iter().map(|m| tape.param(m.clone())).collect();
        let l = build(&mut tape, &vars)?;
        Ok(tape.scalar(l))
    };
    for (i, g) in grads.iter().enumerate() {
        let num = numeric_gradient(&inputs, i, step, &loss).unwrap();
        let err = relative_error(g, &num);
        assert!(err < tol, "input {i}: relative error {err}");
    }
}

/// Weighted sum with fixed random weights so every output entry matters.
fn probe<T: Real>(tape: &mut Tape<T>, x: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.shape(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random(&mut rng, r, c));
    let h = tape.hadamard(x, w)?;
    tape.sum(h)
}

#[test]
fn identity_and_hand_products() {
    let mut tape = Tape::<f32>::new();
    let i = tape.constant(Matrix::identity(2));
    let x = tape.constant(Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]));
    let y = tape.matmul(i, x).unwrap();
    assert_eq!(tape.value(y), tape.value(x));

    let a = tape.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
    let b = tape.constant(Matrix::from_rows(&[[5.0], [6.0]]));
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).as_slice(), &[17.0, 39.0]);
    assert!(tape.matmul(b, b).is_err());
}

#[test]
fn matmul_gradient_f32() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = vec![random::<f32>(&mut rng, 5, 4), random::<f32>(&mut rng, 4, 3)];
    check(inputs, 1e-2, 1e-3, &|t, v| {
        let y = t.matmul(v[0], v[1])?;
        probe(t, y, 7)
    });
}

#[test]
fn matmul_nt_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inputs = vec![random::<f64>(&mut rng, 4, 3), random::<f64>(&mut rng, 5, 3)];
    check(inputs, 1e-5, 1e-6, &|t, v| {
        let y = t.matmul_nt(v[0], v[1])?;
        probe(t, y, 8)
    });
}

#[test]
fn spmm_gradient_and_zero_structure() {
    let s = Arc::new(
        SparseStructure::from_triplets(3, 4, [(0, 1, 1.0), (2, 3, -1.0), (1, 0, 2.0), (2, 0, 1.0)])
            .unwrap(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = vec![random::<f64>(&mut rng, 4, 2)];
    let s2 = Arc::clone(&s);
    check(inputs, 1e-5, 1e-6, &move |t, v| {
        let y = t.spmm(&s2, v[0])?;
        probe(t, y, 9)
    });

    let mut tape = Tape::<f32>::new();
    let x = tape.param(Matrix::filled(4, 2, 1.0));
    let zero = Arc::new(SparseStructure::empty(3, 4));
    let y = tape.spmm(&zero, x).unwrap();
    assert_eq!(tape.value(y), &Matrix::zeros(3, 2));
}

#[test]
fn gelu_values_and_gradient() {
    assert_eq!(gelu(0.0f64), 0.0);
    assert!((gelu(10.0f64) - 10.0).abs() < 1e-4);
    for i in -40..=40 {
        let x = i as f64 * 0.2;
        let tanh_form = 0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh());
        assert!((gelu(x) - tanh_form).abs() < 1e-12, "x={x}");
        assert!((gelu(x as f32) as f64 - tanh_form).abs() < 1e-5, "x={x}");
    }
    assert_eq!(gelu(-200.0f32), 0.0);
    for &x in &[-2.0f32, -0.5, 0.3, 1.7] {
        let h = 1e-2f32;
        let num = (gelu(x + h) as f64 - gelu(x - h) as f64) / (2.0 * h as f64);
        let ana = gelu_grad(x) as f64;
        assert!((ana - num).abs() / ana.abs().max(1e-3) < 1e-3, "x={x}: {ana} vs {num}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    check(vec![random::<f64>(&mut rng, 3, 3).scale(2.0)], 1e-5, 1e-6, &|t, v| {
        let y = t.gelu(v[0])?;
        probe(t, y, 10)
    });
}

#[test]
fn dropout_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::<f32>::new();
    let x = tape.param(Matrix::filled(3, 3, 2.0));
    for (p, training) in [(0.0, true), (0.0, false), (0.6, false), (0.9, false)] {
        let y = tape.dropout(x, p, training, &mut rng).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }
    assert!(tape.dropout(x, 1.0, true, &mut rng).is_err());
    assert!(tape.dropout(x, -0.1, false, &mut rng).is_err());
}

#[test]
fn dropout_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Matrix::filled(1000, 1000, 1.0));
    let y = tape.dropout(x, 0.6, true, &mut rng).unwrap();
    let vals = tape.value(y).as_slice();
    let n = vals.len() as f64;
    let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / n;
    let zeros = vals.iter().filter(|&&v| v == 0.0).count() as f64 / n;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    assert!((zeros - 0.6).abs() < 0.01, "zero fraction {zeros}");
}

#[test]
fn dropout_is_seed_deterministic_and_differentiable() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut tape = Tape::<f32>::new();
        let x = tape.param(Matrix::filled(4, 5, 1.0));
        let y = tape.dropout(x, 0.5, true, &mut rng).unwrap();
        let s = tape.sum(y).unwrap();
        let out = tape.value(y).clone();
        let g = tape.backward(s).unwrap().get(x).unwrap().clone();
        (out, g)
    };
    let (a, ga) = run();
    let (b, gb) = run();
    assert_eq!(a, b);
    assert_eq!(ga, gb);
    assert_eq!(ga, a);
}

#[test]
fn row_normalize_values_and_gradient() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]));
    let y = tape.row_l2_normalize(x).unwrap();
    let v = tape.value(y).as_slice();
    assert!((v[0] - 0.6).abs() < 1e-7 && (v[1] - 0.8).abs() < 1e-7);
    assert_eq!(&v[2..], &[0.0, 0.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    check(vec![random::<f32>(&mut rng, 4, 3)], 1e-2, 1e-3, &|t, v| {
        let y = t.row_l2_normalize(v[0])?;
        probe(t, y, 11)
    });
}

#[test]
fn cross_entropy_reference_values() {
    let mut tape = Tape::<f64>::new();
    let logits = tape.constant(Matrix::filled(4, 7, 0.3));
    let ce = tape.cross_entropy(logits, &[0, 1, 2, 3], &[0, 3, 6, 2]).unwrap();
    assert!((tape.scalar(ce) - 7.0f64.ln()).abs() < 1e-6);

    let mut z = Matrix::<f32>::zeros(1, 3);
    z.set(0, 1, 1000.0);
    let mut tape = Tape::<f32>::new();
    let logits = tape.constant(z);
    let ce = tape.cross_entropy(logits, &[0], &[1]).unwrap();
    assert!(tape.scalar(ce) < 1e-6);
    assert!(tape.cross_entropy(logits, &[], &[]).is_err());
}

#[test]
fn cross_entropy_matches_f64_reference_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z = random::<f32>(&mut rng, 5, 3).scale(3.0);
    let rows = [0usize, 2, 3, 4];
    let labels = [2usize, 0, 1, 1];
    let zd = z.cast::<f64>();
    let reference: f64 = rows
        .iter()
        .zip(&labels)
        .map(|(&r, &y)| {
            let s: f64 = zd.row(r).iter().map(|v| v.exp()).sum();
            -(zd.get(r, y).exp() / s).ln()
        })
        .sum::<f64>()
        / rows.len() as f64;
    let mut tape = Tape::<f32>::new();
    let logits = tape.constant(z.clone());
    let ce = tape.cross_entropy(logits, &rows, &labels).unwrap();
    assert!((tape.scalar(ce) as f64 - reference).abs() < 1e-5);

    check(vec![z.cast::<f64>()], 1e-5, 1e-6, &|t, v| t.cross_entropy(v[0], &rows, &labels));
}

#[test]
fn backward_basics() {
    let mut tape = Tape::<f64>::new();
    let w = tape.param(Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]));
    let s = tape.sum(w).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(w).unwrap(), &Matrix::filled(2, 2, 1.0));
    assert!(matches!(tape.backward(s), Err(Error::TapeConsumed)));

    let mut tape = Tape::<f64>::new();
    let w0 = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
    let w = tape.param(w0.clone());
    let sq = tape.hadamard(w, w).unwrap();
    let s = tape.sum(sq).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(w).unwrap(), &w0.scale(2.0));
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Matrix::filled(2, 2, 1.0));
    let w = tape.param(Matrix::filled(2, 1, 0.5));
    let y = tape.matmul(x, w).unwrap();
    let s = tape.sum(y).unwrap();
    let g = tape.backward(s).unwrap();
    assert!(g.get(x).is_none());
    assert_eq!(g.get(w).unwrap().as_slice(), &[2.0, 2.0]);
}

#[test]
fn non_finite_values_are_rejected() {
    let mut tape = Tape::<f32>::new();
    let a = tape.constant(Matrix::filled(1, 2, 1e30));
    let b = tape.constant(Matrix::filled(2, 1, 1e30));
    assert!(matches!(tape.matmul(a, b), Err(Error::NonFinite { .. })));
}

#[test]
fn scale_and_add_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inputs = vec![random::<f64>(&mut rng, 2, 3), random::<f64>(&mut rng, 2, 3)];
    check(inputs, 1e-5, 1e-6, &|t, v| {
        let a = t.scale(v[0], -1.5)?;
        let s = t.add(a, v[1])?;
        let h = t.hadamard(s, v[0])?;
        t.sum(h)
    });
}
