use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::EstimateError;
use crate::types::{Estimand, EstimateResult, MethodTag};

/// Sum that depends only on the multiset of values: positives and
/// negatives are each added in order of increasing magnitude, then
/// combined. Negating every input negates the result exactly.
fn ordered_sum(v: Vec<f64>) -> f64 {
    let (mut pos, mut neg): (Vec<f64>, Vec<f64>) = v.into_iter().partition(|x| x.is_sign_positive());
    pos.sort_by(f64::total_cmp);
    neg.sort_by(|a, b| b.total_cmp(a));
    pos.into_iter().sum::<f64>() + neg.into_iter().sum::<f64>()
}

pub fn mean(v: &[f64]) -> f64 {
    ordered_sum(v.to_vec()) / v.len() as f64
}

/// Sample variance (n - 1 denominator). Invariant to permutations and to
/// negation of `v`, bit for bit.
pub fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    ordered_sum(v.iter().map(|x| (x - m) * (x - m)).collect()) / (v.len() as f64 - 1.0)
}

/// Sample covariance of paired vectors (n - 1 denominator).
pub fn sample_covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    ordered_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect()) / (a.len() as f64 - 1.0)
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Standard error `sqrt(var(ic)/n)` and the Wald interval around `point`.
pub fn variance_from_ic(point: f64, ic: &[f64], level: f64) -> Result<(f64, f64, f64), EstimateError> {
    if ic.len() < 2 {
        return Err(EstimateError::TooFewRows(ic.len()));
    }
    let se = (sample_variance(ic) / ic.len() as f64).sqrt();
    let half = z_value(level) * se;
    Ok((se, point - half, point + half))
}

/// Packages a point estimate and influence values into a result.
pub fn finish(
    estimand: Estimand,
    method: MethodTag,
    point: f64,
    ic: Vec<f64>,
    level: f64,
) -> Result<EstimateResult, EstimateError> {
    let (se, ci_low, ci_high) = variance_from_ic(point, &ic, level)?;
    Ok(EstimateResult { estimand, method, point, ic, se, ci_low, ci_high, ci_level: level, diagnostics: Default::default() })
}

/// psi_1 - psi_0 with influence values ic_1 - ic_0.
pub fn ate_from_arms(treated: &EstimateResult, control: &EstimateResult) -> Result<EstimateResult, EstimateError> {
    if treated.ic.len() != control.ic.len() {
        return Err(EstimateError::MismatchedLength(treated.ic.len(), control.ic.len()));
    }
    let ic: Vec<f64> = treated.ic.iter().zip(&control.ic).map(|(a, b)| a - b).collect();
    finish(Estimand::Ate, treated.method, treated.point - control.point, ic, treated.ci_level)
}
