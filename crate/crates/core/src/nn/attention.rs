use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::activation::{softmax_backward, softmax_slice};
use crate::scalar::Scalar;
use crate::tensor::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc, Parameter, Parameterized, Tensor};

/// Bilinear (general) attention: `score_i = q^T M k_i`, weights are the
/// softmax of the scores and the context is the weighted sum of keys.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearAttention<T> {
    pub matrix: Parameter<T>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    projected: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> BilinearAttention<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, query_dim: usize, key_dim: usize, rng: &mut R) -> Self {
        BilinearAttention {
            matrix: Parameter::weight(format!("{name}.bilinear"), query_dim, key_dim, rng),
        }
    }

    pub fn query_dim(&self) -> usize {
        self.matrix.value.shape()[0]
    }

    pub fn key_dim(&self) -> usize {
        self.matrix.value.shape()[1]
    }

    pub fn forward(&self, query: &[T], keys: &[Vec<T>]) -> Result<(Vec<T>, AttentionCache<T>)> {
        if keys.is_empty() {
            return Err(Error::Empty("bilinear_attention"));
        }
        let (qd, kd) = (self.query_dim(), self.key_dim());
        if query.len() != qd || keys.iter().any(|k| k.len() != kd) {
            return Err(Error::shape(
                "bilinear_attention",
                format!("query dim {} / key dim {} vs matrix {qd}x{kd}", query.len(), keys[0].len()),
            ));
        }
        let mut projected = vec![T::zero(); kd];
        matvec_t_acc(self.matrix.value.data(), qd, kd, query, &mut projected);
        let scores: Vec<T> = keys.iter().map(|k| dot(&projected, k)).collect();
        let weights = softmax_slice(&scores);
        let mut context = vec![T::zero(); kd];
        for (w, k) in weights.iter().zip(keys) {
            axpy(*w, k, &mut context);
        }
        Ok((context, AttentionCache { projected, weights }))
    }

    /// Accumulates `dM`, adds into `d_query` and `d_keys`.
    pub fn backward(
        &mut self,
        query: &[T],
        keys: &[Vec<T>],
        cache: &AttentionCache<T>,
        d_context: &[T],
        d_query: &mut [T],
        d_keys: &mut [Vec<T>],
    ) {
        let (qd, kd) = (self.query_dim(), self.key_dim());
        let dw: Vec<T> = keys.iter().map(|k| dot(d_context, k)).collect();
        for (dk, w) in d_keys.iter_mut().zip(&cache.weights) {
            axpy(*w, d_context, dk);
        }
        let mut ds = vec![T::zero(); keys.len()];
        softmax_backward(&cache.weights, &dw, &mut ds);
        let mut du = vec![T::zero(); kd];
        for ((k, dk), s) in keys.iter().zip(d_keys.iter_mut()).zip(&ds) {
            axpy(*s, k, &mut du);
            axpy(*s, &cache.projected, dk);
        }
        outer_acc(self.matrix.grad.data_mut(), query, &du);
        matvec_acc(self.matrix.value.data(), qd, kd, &du, d_query);
    }
}

impl<T: Scalar> Parameterized<T> for BilinearAttention<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![&self.matrix]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.matrix]
    }
}

/// Tensor-level entry point returning `(context, weights)`.
pub fn bilinear_attention<T: Scalar>(
    query: &Tensor<T>,
    keys: &[Tensor<T>],
    matrix: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let att = BilinearAttention {
        matrix: Parameter::new("bilinear", matrix.clone()),
    };
    let raw: Vec<Vec<T>> = keys.iter().map(|k| k.data().to_vec()).collect();
    let (ctx, cache) = att.forward(query.data(), &raw)?;
    Ok((Tensor::vector(&ctx), Tensor::vector(&cache.weights)))
}
