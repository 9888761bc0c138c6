use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{matvec_acc, matvec_t_acc, outer_acc, Parameter, Parameterized, Tensor};

/// `y = W x + b` with gradient accumulation into `W`, `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Scalar> Affine<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Affine {
            weight: Parameter::weight(format!("{name}.weight"), n_out, n_in, rng),
            bias: Parameter::zeros(format!("{name}.bias"), &[n_out]),
        }
    }

    pub fn from_parts(weight: Parameter<T>, bias: Parameter<T>) -> Result<Self> {
        let s = weight.value.shape();
        if s.len() != 2 || bias.value.shape() != [s[0]] {
            return Err(Error::shape(
                "affine",
                format!("W {:?} incompatible with b {:?}", s, bias.value.shape()),
            ));
        }
        Ok(Affine { weight, bias })
    }

    pub fn n_in(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_in());
        let mut y = self.bias.value.data().to_vec();
        matvec_acc(self.weight.value.data(), self.n_out(), self.n_in(), x, &mut y);
        y
    }

    /// Accumulates parameter gradients and adds `W^T dy` into `dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T], dx: &mut [T]) {
        let (rows, cols) = (self.n_out(), self.n_in());
        outer_acc(self.weight.grad.data_mut(), dy, x);
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(dy) {
            *g += *d;
        }
        matvec_t_acc(self.weight.value.data(), rows, cols, dy, dx);
    }
}

impl<T: Scalar> Parameterized<T> for Affine<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Checked one-shot affine map on bare tensors.
pub fn affine<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let ws = w.shape();
    if ws.len() != 2 {
        return Err(Error::shape("affine", format!("W must be a matrix, got {ws:?}")));
    }
    if x.shape() != [ws[1]] {
        return Err(Error::shape(
            "affine",
            format!("x {:?} does not match W {:?}", x.shape(), ws),
        ));
    }
    if b.shape() != [ws[0]] {
        return Err(Error::shape(
            "affine",
            format!("b {:?} does not match W {:?}", b.shape(), ws),
        ));
    }
    let mut y = b.data().to_vec();
    matvec_acc(w.data(), ws[0], ws[1], x.data(), &mut y);
    Tensor::from_vec(&[ws[0]], y)
}
