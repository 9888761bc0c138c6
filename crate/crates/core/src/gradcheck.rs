//! Central-difference verification of hand-written backward passes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Parameterized;

/// Coordinates whose analytic and numeric gradients are both below this
/// magnitude are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// `(f(+eps) - f(-eps)) / 2 eps` where `f` receives the signed offset.
pub fn central_difference<T: Scalar>(eps: T, mut f: impl FnMut(T) -> T) -> T {
    let plus = f(eps);
    let minus = f(-eps);
    (plus - minus) / (eps + eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
    pub coordinates: usize,
}

/// Compares the gradients accumulated by `loss` against central differences
/// for every coordinate of every parameter of `model`.
///
/// `loss` must be deterministic and must accumulate gradients into the
/// model's parameters. Gradients are left holding the analytic values.
pub fn gradcheck<T, M, F>(model: &mut M, eps: f64, mut loss: F) -> Result<GradCheckReport>
where
    T: Scalar,
    M: Parameterized<T>,
    F: FnMut(&mut M) -> Result<T>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::Param(format!("gradcheck eps {eps} outside (0, 1e-3]")));
    }
    model.zero_grad();
    let base = loss(model)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite: {base}")));
    }
    let analytic: Vec<Vec<T>> = model
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    let step = T::lit(eps);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: String::new(),
        coordinates: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        for (i, &g) in grads.iter().enumerate() {
            let original = model.params()[pi].value.data()[i];
            let mut eval = |offset: T, model: &mut M| -> Result<T> {
                model.params_mut()[pi].value.data_mut()[i] = original + offset;
                let v = loss(model)?;
                if !v.is_finite() {
                    return Err(Error::Numeric(format!(
                        "loss not finite at {}[{i}]",
                        names[pi]
                    )));
                }
                Ok(v)
            };
            let plus = eval(step, model)?;
            let minus = eval(-step, model)?;
            model.params_mut()[pi].value.data_mut()[i] = original;
            let numeric = (plus - minus).as_f64() / (2.0 * eps);
            let err = relative_error(g.as_f64(), numeric);
            report.coordinates += 1;
            if err > report.max_relative_error || report.worst.is_empty() {
                report.max_relative_error = err;
                report.worst = format!("{}[{i}]", names[pi]);
            }
        }
    }
    for (p, g) in model.params_mut().into_iter().zip(analytic) {
        p.grad.data_mut().copy_from_slice(&g);
    }
    Ok(report)
}
