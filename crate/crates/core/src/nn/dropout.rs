use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar, R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Param(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(vec![T::one(); len]);
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect())
}

/// Per-position masks for a sequence; `None` at inference.
#[derive(Debug, Clone)]
pub struct SeqDropout<T> {
    masks: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> SeqDropout<T> {
    pub fn none() -> Self {
        SeqDropout { masks: None }
    }

    pub fn sample<R: Rng + ?Sized>(steps: usize, dim: usize, rate: Option<f64>, rng: &mut R) -> Result<Self> {
        let masks = match rate {
            Some(r) if r > 0.0 => Some(
                (0..steps)
                    .map(|_| dropout_mask(dim, r, rng))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(SeqDropout { masks })
    }

    pub fn apply(&self, seq: &mut [Vec<T>]) {
        if let Some(masks) = &self.masks {
            for (v, m) in seq.iter_mut().zip(masks) {
                v.iter_mut().zip(m).for_each(|(a, b)| *a *= *b);
            }
        }
    }
}
