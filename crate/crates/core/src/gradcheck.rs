//! Central finite differences, used by the gradient-check tests.

use crate::error::Result;
use crate::linalg::{Matrix, Real};

/// Central-difference gradient of `loss` with respect to `params[which]`.
pub fn numeric_gradient<T: Real>(
    params: &[Matrix<T>],
    which: usize,
    step: f64,
    loss: &dyn Fn(&[Matrix<T>]) -> Result<T>,
) -> Result<Matrix<f64>> {
    let mut work: Vec<Matrix<T>> = params.to_vec();
    let (rows, cols) = params[which].shape();
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows * cols {
        let orig = work[which].as_slice()[i];
        work[which].as_mut_slice()[i] = orig + T::lit(step);
        let plus = loss(&work)?.to_f64().unwrap_or(f64::NAN);
        work[which].as_mut_slice()[i] = orig - T::lit(step);
        let minus = loss(&work)?.to_f64().unwrap_or(f64::NAN);
        work[which].as_mut_slice()[i] = orig;
        out.as_mut_slice()[i] = (plus - minus) / (2.0 * step);
    }
    Ok(out)
}

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`, or 0 when both vanish.
pub fn relative_error<T: Real>(analytic: &Matrix<T>, numeric: &Matrix<f64>) -> f64 {
    let a = analytic.cast::<f64>();
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.frobenius().max(numeric.frobenius());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
