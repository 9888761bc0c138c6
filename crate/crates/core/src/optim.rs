//! Gradient clipping and the Adam optimizer.

use crate::scalar::Scalar;
use crate::tensor::Parameter;

/// Rescales all gradients jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(params: &mut [&mut Parameter<T>], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = params
        .iter()
        .map(|p| p.grad.sum_squares().as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = T::lit(max_norm / norm);
        for p in params.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per parameter in the order
/// the parameters are passed to [`Adam::step`], which must be stable.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// Applies one update and zeroes every gradient.
    pub fn step(&mut self, params: &mut [&mut Parameter<T>]) {
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        assert_eq!(self.first_moment.len(), params.len(), "parameter set changed between steps");
        self.step_count += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let one = T::one();
        let t = self.step_count as i32;
        let bc1 = T::lit(1.0 - c.beta1.powi(t));
        let bc2 = T::lit(1.0 - c.beta2.powi(t));
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.epsilon);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let Parameter { value, grad, .. } = &mut **p;
            for (((w, &g), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = b1 * *mi + (one - b1) * g;
                *vi = b2 * *vi + (one - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            grad.fill(T::zero());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn param(vals: &[f64], grads: &[f64]) -> Parameter<f64> {
        let mut p = Parameter::new("p", Tensor::vector(vals));
        p.grad.data_mut().copy_from_slice(grads);
        p
    }

    #[test]
    fn clip_leaves_small_norms_alone() {
        let mut a = param(&[0.0, 0.0], &[1.5, 2.0]);
        let n = clip_global_norm(&mut [&mut a], 5.0);
        assert!((n - 2.5).abs() < 1e-15);
        assert_eq!(a.grad.data(), &[1.5, 2.0]);
    }

    #[test]
    fn clip_scales_large_norms() {
        let mut a = param(&[0.0, 0.0], &[6.0, 8.0]);
        let n = clip_global_norm(&mut [&mut a], 5.0);
        assert!((n - 10.0).abs() < 1e-12);
        assert_eq!(a.grad.data(), &[3.0, 4.0]);
        let post = a.grad.sum_squares().sqrt();
        assert!((post - 5.0).abs() < 1e-9);
    }

    #[test]
    fn clip_property_over_random_multi_tensor_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let k = rng.gen_range(1..5);
            let mut ps: Vec<Parameter<f64>> = (0..k)
                .map(|_| {
                    let n = rng.gen_range(1..6);
                    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
                    param(&vec![0.0; n], &g)
                })
                .collect();
            let before: Vec<Vec<f64>> = ps.iter().map(|p| p.grad.data().to_vec()).collect();
            let mut refs: Vec<&mut Parameter<f64>> = ps.iter_mut().collect();
            clip_global_norm(&mut refs, 5.0);
            let post: f64 = ps.iter().map(|p| p.grad.sum_squares()).sum::<f64>().sqrt();
            assert!(post <= 5.0 + 1e-9);
            for (p, b) in ps.iter().zip(&before) {
                for (g, g0) in p.grad.data().iter().zip(b) {
                    assert!(g.abs() <= g0.abs() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = param(&[1.0, -2.0], &[0.0, 0.0]);
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut [&mut p]);
        assert_eq!(p.value.data(), &[1.0, -2.0]);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        // m1 = 0.1, v1 = 0.001; bias-corrected both equal 1, so the step is
        // lr * 1 / (1 + eps).
        let mut p = param(&[0.5], &[1.0]);
        let cfg = AdamConfig::default();
        let mut opt = Adam::new(cfg.clone());
        opt.step(&mut [&mut p]);
        let expected = 0.5 - cfg.learning_rate / (1.0 + cfg.epsilon);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
        assert_eq!(p.grad.data(), &[0.0]);
    }

    #[test]
    fn adam_identical_params_update_identically() {
        let mut a = param(&[0.3, 0.1], &[0.2, -0.7]);
        let mut b = a.clone();
        let mut opt = Adam::new(AdamConfig::default());
        for _ in 0..3 {
            a.grad.data_mut().copy_from_slice(&[0.2, -0.7]);
            b.grad.data_mut().copy_from_slice(&[0.2, -0.7]);
            opt.step(&mut [&mut a, &mut b]);
        }
        assert_eq!(a.value, b.value);
    }
}
