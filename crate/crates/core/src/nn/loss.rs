use crate::error::{Error, Result};
use crate::nn::activation::{log_softmax_slice, softmax_slice};
use crate::scalar::Scalar;

/// Mean binary cross-entropy of `sigmoid(logits)` against 0/1 targets.
/// Returns the loss and its gradient w.r.t. the logits.
pub fn multilabel_bce_loss<T: Scalar>(logits: &[T], targets: &[T]) -> Result<(T, Vec<T>)> {
    if logits.len() != targets.len() {
        return Err(Error::shape(
            "multilabel_bce_loss",
            format!("{} logits vs {} targets", logits.len(), targets.len()),
        ));
    }
    if logits.is_empty() {
        return Err(Error::Empty("multilabel_bce_loss"));
    }
    if let Some(t) = targets.iter().find(|t| **t != T::zero() && **t != T::one()) {
        return Err(Error::Param(format!("bce target {t} not in {{0, 1}}")));
    }
    let n = T::lit(logits.len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&x, &y) in logits.iter().zip(targets) {
        // max(x, 0) - x y + ln(1 + e^{-|x|})
        loss += x.max(T::zero()) - x * y + (-x.abs()).exp().ln_1p();
        grad.push((x.sigmoid() - y) / n);
    }
    Ok((loss / n, grad))
}

/// Mean over steps of `-log softmax(logits_t)[gold_t]`, with gradients.
pub fn tag_xent_loss<T: Scalar>(per_step_logits: &[Vec<T>], gold: &[usize]) -> Result<(T, Vec<Vec<T>>)> {
    if per_step_logits.len() != gold.len() {
        return Err(Error::shape(
            "tag_xent_loss",
            format!("{} steps vs {} gold tags", per_step_logits.len(), gold.len()),
        ));
    }
    if gold.is_empty() {
        return Err(Error::Empty("tag_xent_loss"));
    }
    let n = T::lit(gold.len() as f64);
    let mut loss = T::zero();
    let mut grads = Vec::with_capacity(gold.len());
    for (logits, &g) in per_step_logits.iter().zip(gold) {
        if g >= logits.len() {
            return Err(Error::Index {
                what: "tag set",
                index: g,
                len: logits.len(),
            });
        }
        loss -= log_softmax_slice(logits)[g];
        let mut d = softmax_slice(logits);
        d[g] -= T::one();
        d.iter_mut().for_each(|v| *v /= n);
        grads.push(d);
    }
    Ok((loss / n, grads))
}
