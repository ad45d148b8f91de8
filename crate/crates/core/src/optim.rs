//! Adam / AdamW over a list of dense parameter blocks, plus global-norm clipping.

use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled (AdamW) decay; 0 gives plain Adam.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn adam(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn adamw(learning_rate: f64, weight_decay: f64) -> Self {
        AdamConfig {
            weight_decay,
            ..Self::adam(learning_rate)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, block_sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = block_sizes.into_iter().collect();
        Adam {
            cfg,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut DenseMatrix], grads: &[&DenseMatrix]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
            weight_decay: wd,
        } = self.cfg;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let p = p.as_mut_slice();
            let g = g.as_slice();
            assert_eq!(p.len(), g.len());
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                if wd != 0.0 {
                    p[i] *= 1.0 - lr * wd;
                }
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

pub fn global_norm(grads: &[&DenseMatrix]) -> f64 {
    grads.iter().map(|g| g.sum_squares()).sum::<f64>().sqrt()
}

/// Rescales all blocks so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut DenseMatrix], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sum_squares()).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale(k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut p = DenseMatrix::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let g = DenseMatrix::from_rows(&[vec![0.5, -3.0]]).unwrap();
        let mut opt = Adam::new(AdamConfig::adam(0.1), [2]);
        opt.step(&mut [&mut p], &[&g]);
        // bias-corrected first step is lr * sign(g) up to eps
        assert!((p.get(0, 0) - 0.9).abs() < 1e-7);
        assert!((p.get(0, 1) + 1.9).abs() < 1e-7);
    }

    #[test]
    fn adamw_decay_is_decoupled() {
        let mut p = DenseMatrix::from_rows(&[vec![2.0]]).unwrap();
        let g = DenseMatrix::zeros(1, 1);
        let mut opt = Adam::new(AdamConfig::adamw(0.1, 0.5), [1]);
        opt.step(&mut [&mut p], &[&g]);
        assert!((p.get(0, 0) - 2.0 * (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = DenseMatrix::from_rows(&[vec![3.0, -4.0, 0.5]]).unwrap();
        let mut opt = Adam::new(AdamConfig::adam(0.05), [3]);
        for _ in 0..2000 {
            let g = p.clone();
            opt.step(&mut [&mut p], &[&g]);
        }
        assert!(p.sum_squares() < 1e-6, "{p:?}");
    }

    #[test]
    fn clipping_bounds_the_global_norm() {
        let mut a = DenseMatrix::from_rows(&[vec![3.0, 0.0]]).unwrap();
        let mut b = DenseMatrix::from_rows(&[vec![4.0]]).unwrap();
        let pre = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert!((pre - 5.0).abs() < 1e-12);
        assert!(global_norm(&[&a, &b]) <= 1.0 + 1e-12);
        assert!((a.get(0, 0) - 0.6).abs() < 1e-12);

        let mut small = DenseMatrix::from_rows(&[vec![0.1]]).unwrap();
        clip_global_norm(&mut [&mut small], 1.0);
        assert_eq!(small.get(0, 0), 0.1);
    }
}
