use crate::error::{Error, Result};
use crate::nn::model::ModelParams;

/// Compares the analytic parameter gradient of a scalar loss against central
/// finite differences and returns the worst relative error,
/// `|analytic - numeric| / max(1, |analytic|)`.
///
/// `loss` maps the batch logits to `(value, d value / d logit)`. The analytic
/// side composes that per-logit gradient with [`ModelParams::backward`]; the
/// numeric side re-evaluates the loss at `theta +/- eps` for every parameter.
/// Callers are responsible for sampling away from non-differentiable points
/// (ReLU kinks, clipping switches, gate flips).
pub fn grad_check<S, F>(model: &ModelParams, loss: F, batch: &[S], eps: f64) -> Result<f64>
where
    S: AsRef<[f64]>,
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::config(format!(
            "finite-difference eps must be positive, got {eps}"
        )));
    }
    let scores = model.forward(batch)?;
    let (value, dscores) = loss(&scores);
    if !value.is_finite() {
        return Err(Error::Numeric("loss value is not finite".into()));
    }
    if dscores.len() != batch.len() {
        return Err(Error::shape("loss gradient", batch.len(), dscores.len()));
    }
    let analytic = model.backward(batch, &dscores)?;

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let eval = |m: &ModelParams| -> Result<f64> {
        let s = m.forward(batch)?;
        let (v, _) = loss(&s);
        if !v.is_finite() {
            return Err(Error::Numeric("perturbed loss value is not finite".into()));
        }
        Ok(v)
    };
    for l in 0..model.weights.len() {
        for k in 0..model.weights[l].len() {
            let orig = probe.weights[l][k];
            probe.weights[l][k] = orig + eps;
            let plus = eval(&probe)?;
            probe.weights[l][k] = orig - eps;
            let minus = eval(&probe)?;
            probe.weights[l][k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.weights[l][k];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
        for k in 0..model.biases[l].len() {
            let orig = probe.biases[l][k];
            probe.biases[l][k] = orig + eps;
            let plus = eval(&probe)?;
            probe.biases[l][k] = orig - eps;
            let minus = eval(&probe)?;
            probe.biases[l][k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.biases[l][k];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
