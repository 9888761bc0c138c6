use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Max-shifted softmax over a slice. Returns an empty vector for empty input.
pub fn softmax_slice<T: Scalar>(x: &[T]) -> Vec<T> {
    let Some(max) = x.iter().copied().reduce(T::max) else {
        return Vec::new();
    };
    let mut out: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let z: T = out.iter().copied().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

pub fn log_softmax_slice<T: Scalar>(x: &[T]) -> Vec<T> {
    let Some(max) = x.iter().copied().reduce(T::max) else {
        return Vec::new();
    };
    let lse = x.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    x.iter().map(|&v| v - lse).collect()
}

pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.is_empty() {
        return Err(Error::Empty("softmax"));
    }
    if !x.all_finite() {
        return Err(Error::Numeric("softmax input not finite".into()));
    }
    Tensor::from_vec(x.shape(), softmax_slice(x.data()))
}

/// Vector-Jacobian product of softmax: `dx_i = p_i (dp_i - <p, dp>)`.
pub fn softmax_backward<T: Scalar>(p: &[T], dp: &[T], dx: &mut [T]) {
    let inner: T = p.iter().zip(dp).map(|(a, b)| *a * *b).sum();
    for ((d, &pi), &g) in dx.iter_mut().zip(p).zip(dp) {
        *d += pi * (g - inner);
    }
}
