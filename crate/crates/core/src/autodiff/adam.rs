use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        Self {
            cfg,
            m: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[&Matrix<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "{} params / {} grads for {} moment buffers",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.m[i].shape() || g.shape() != self.m[i].shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!(
                        "parameter {i}: {:?} / grad {:?} / state {:?}",
                        p.shape(),
                        g.shape(),
                        self.m[i].shape()
                    ),
                ));
            }
        }

        self.t += 1;
        let b1 = T::lit(self.cfg.beta1);
        let b2 = T::lit(self.cfg.beta2);
        let wd = T::lit(self.cfg.weight_decay);
        let eps = T::lit(self.cfg.eps);
        let lr = T::lit(self.cfg.lr);
        let c1 = T::lit(1.0 - self.cfg.beta1.powi(self.t as i32));
        let c2 = T::lit(1.0 - self.cfg.beta2.powi(self.t as i32));
        let one = T::one();

        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.m[i].as_mut_slice();
            let v = self.v[i].as_mut_slice();
            for (((pj, &gj), mj), vj) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let gj = gj + wd * *pj;
                *mj = b1 * *mj + (one - b1) * gj;
                *vj = b2 * *vj + (one - b2) * gj * gj;
                let m_hat = *mj / c1;
                let v_hat = *vj / c2;
                *pj = *pj - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            weight_decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Matrix::<f64>::from_rows(&[[1.0, -2.0]]);
        let before = p.clone();
        let mut adam = Adam::new(plain(0.01), &[(1, 2)]);
        adam.step(&mut [&mut p], &[&Matrix::zeros(1, 2)]).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Matrix::<f64>::filled(1, 1, 0.5);
        let mut adam = Adam::new(plain(0.01), &[(1, 1)]);
        adam.step(&mut [&mut p], &[&Matrix::filled(1, 1, 1.0)]).unwrap();
        assert!((p.get(0, 0) - 0.49).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        // Scalar oracle, same recurrences in plain f64.
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=100 {
            let g = 2.0 * w;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 0.05 * mh / (vh.sqrt() + 1e-8);
        }
        assert!(w.abs() < 0.05);

        let mut p = Matrix::<f64>::filled(1, 1, 1.0);
        let mut adam = Adam::new(plain(0.05), &[(1, 1)]);
        for _ in 0..100 {
            let g = p.scale(2.0);
            adam.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert!((p.get(0, 0) - w).abs() < 1e-12);
        assert!(p.get(0, 0).abs() < 0.05);
    }

    #[test]
    fn weight_decay_enters_the_gradient() {
        let mut p = Matrix::<f64>::filled(1, 1, 2.0);
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg, &[(1, 1)]);
        adam.step(&mut [&mut p], &[&Matrix::zeros(1, 1)]).unwrap();
        // effective gradient 1.0 > 0, so the first step is exactly -lr
        assert!((p.get(0, 0) - 1.9).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Matrix::<f32>::zeros(2, 2);
        let mut adam = Adam::new(AdamConfig::default(), &[(2, 2)]);
        assert!(adam.step(&mut [&mut p], &[&Matrix::zeros(2, 1)]).is_err());
        assert!(adam.step(&mut [], &[]).is_err());
    }
}
