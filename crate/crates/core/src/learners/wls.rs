use nalgebra::DMatrix;

use super::basis::Basis;
use super::linalg::{solve_normal, weighted_gram, Scaling};
use super::model::{GlmFit, Predictor};
use crate::error::LearnError;

pub(crate) fn check_weights(w: &[f64]) -> Result<f64, LearnError> {
    if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(LearnError::Shape("weights must be finite and non-negative".into()));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(LearnError::AllZeroWeights);
    }
    Ok(total)
}

/// Weighted least squares of `y` on `features` plus an intercept.
///
/// Minimises `sum w_i (y_i - f(x_i))^2`. Rank-deficient designs are solved
/// with a `1e-8 * trace`-scaled ridge and the fit is flagged `ridged`.
pub fn fit_wls(features: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<Predictor, LearnError> {
    fit_wls_basis(features, y, w, Basis::Main)
}

pub(crate) fn fit_wls_basis(raw: &DMatrix<f64>, y: &[f64], w: &[f64], basis: Basis) -> Result<Predictor, LearnError> {
    if raw.nrows() != y.len() || y.len() != w.len() {
        return Err(LearnError::Shape(format!("{} rows, {} outcomes, {} weights", raw.nrows(), y.len(), w.len())));
    }
    check_weights(w)?;
    let rows: Vec<usize> = (0..y.len()).filter(|&i| w[i] > 0.0).collect();
    let e = super::basis::expand_matrix(raw, basis);
    let scaling = Scaling::fit(&e, Some(&rows), true);
    let d = scaling.design(&e, true);
    let (g, b) = weighted_gram(&d, &rows, w, y);
    let (beta, ridged) = solve_normal(&g, &b, true);
    Ok(Predictor::Linear(GlmFit {
        basis,
        scaling,
        beta: beta.iter().copied().collect(),
        intercept: true,
        ridged,
        penalized: false,
        iterations: 1,
    }))
}
