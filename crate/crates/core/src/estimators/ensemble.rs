use super::inference::{finish, sample_covariance, sample_variance};
use crate::error::EstimateError;
use crate::types::{EstimateResult, MethodTag};

/// Weight on the first estimator in the variance-minimising combination,
/// `(v2 - c + δV) / (V - 2c + 2δV)` with `V = v1 + v2`, truncated to
/// [0, 1].
///
/// The denominator is formed as the sum of the two numerators, so equal
/// variances give exactly 1/2.
pub fn ensemble_weight(var1: f64, var2: f64, cov: f64, delta: f64) -> f64 {
    let dv = delta * (var1 + var2);
    let num1 = var2 - cov + dv;
    let num2 = var1 - cov + dv;
    let den = num1 + num2;
    if !(den > 0.0) || !den.is_finite() {
        return 0.5;
    }
    (num1 / den).clamp(0.0, 1.0)
}

/// Combines two estimates of the same quantity using their paired
/// influence values.
pub fn ensemble(res1: &EstimateResult, res2: &EstimateResult, delta: f64) -> Result<EstimateResult, EstimateError> {
    if res1.ic.len() != res2.ic.len() {
        return Err(EstimateError::MismatchedLength(res1.ic.len(), res2.ic.len()));
    }
    let (v1, v2) = (sample_variance(&res1.ic), sample_variance(&res2.ic));
    let cov = sample_covariance(&res1.ic, &res2.ic);
    let w = ensemble_weight(v1, v2, cov, delta);
    let point = w * res1.point + (1.0 - w) * res2.point;
    let ic = res1.ic.iter().zip(&res2.ic).map(|(a, b)| w * a + (1.0 - w) * b).collect();
    Ok(finish(res1.estimand, MethodTag::Ensemble, point, ic, res1.ci_level)?
        .with_diagnostic("weight", w)
        .with_diagnostic("first", res1.method.as_str())
        .with_diagnostic("second", res2.method.as_str()))
}
