//! Weighted logistic regression by iteratively reweighted least squares.
//!
//! Outcomes may be fractional (quasi-binomial), and the linear predictor
//! may carry a fixed per-row offset. Separation is handled by an
//! L2-penalised refit rather than by failing.

use nalgebra::{DMatrix, DVector};

use super::basis::{expand_matrix, Basis};
use super::linalg::{solve_normal, Scaling};
use super::model::{expit, logit, GlmFit, Predictor};
use super::wls::check_weights;
use crate::error::LearnError;

/// L2 penalty (per unit of total weight) used once separation is detected.
pub const SEPARATION_PENALTY: f64 = 1e-4;
/// A fitted linear predictor beyond this magnitude signals separation.
const SEPARATION_ETA: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsOptions {
    pub intercept: bool,
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the score, per unit of total
    /// weight.
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self { intercept: true, max_iter: 100, tol: 1e-8, max_halvings: 30 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IrlsOutcome {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub penalized: bool,
    pub ridged: bool,
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: DMatrix<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    off: Vec<f64>,
    intercept: bool,
    opts: &'a IrlsOptions,
}

impl Problem<'_> {
    fn objective(&self, eta: &[f64], beta: &DVector<f64>, penalty: f64) -> f64 {
        let ll: f64 = eta
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&e, &y), &w)| if w == 0.0 { 0.0 } else { w * (y * e - softplus(e)) })
            .sum();
        ll - 0.5 * penalty * self.penalty_norm(beta)
    }

    fn penalty_norm(&self, beta: &DVector<f64>) -> f64 {
        beta.iter().skip(usize::from(self.intercept)).map(|b| b * b).sum()
    }

    fn eta(&self, beta: &DVector<f64>) -> Vec<f64> {
        let xb = &self.x * beta;
        xb.iter().zip(&self.off).map(|(a, b)| a + b).collect()
    }

    fn run(&self, penalty: f64, wsum: f64) -> Result<IrlsOutcome, LearnError> {
        let q = self.x.ncols();
        let m = self.x.nrows();
        let mut beta = DVector::zeros(q);
        if self.intercept {
            let ybar = self.y.iter().zip(&self.w).map(|(y, w)| y * w).sum::<f64>() / wsum;
            let obar = self.off.iter().zip(&self.w).map(|(o, w)| o * w).sum::<f64>() / wsum;
            beta[0] = logit(ybar.clamp(1e-6, 1.0 - 1e-6)) - obar;
        }
        let first = usize::from(self.intercept);
        let mut eta = self.eta(&beta);
        let mut obj = self.objective(&eta, &beta, penalty);
        let mut ridged = false;
        let mut score_norm = f64::INFINITY;
        for iter in 0..self.opts.max_iter {
            let p: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
            let resid = DVector::from_fn(m, |i, _| self.w[i] * (self.y[i] - p[i]));
            let mut score = self.x.tr_mul(&resid);
            for j in first..q {
                score[j] -= penalty * beta[j];
            }
            score_norm = score.amax();
            if score_norm <= self.opts.tol * wsum.max(1.0) {
                return Ok(IrlsOutcome { beta, iterations: iter, penalized: penalty > 0.0, ridged });
            }
            let sh: Vec<f64> = (0..m).map(|i| (self.w[i] * p[i] * (1.0 - p[i])).sqrt()).collect();
            let xh = DMatrix::from_fn(m, q, |i, j| self.x[(i, j)] * sh[i]);
            let mut h = xh.tr_mul(&xh);
            for j in first..q {
                h[(j, j)] += penalty;
            }
            let (step, r) = solve_normal(&h, &score, self.intercept);
            ridged |= r;

            let mut t = 1.0;
            let mut halvings = 0;
            loop {
                let cand = &beta + &step * t;
                let cand_eta = self.eta(&cand);
                let cand_obj = self.objective(&cand_eta, &cand, penalty);
                if cand_obj.is_finite() && cand_obj >= obj - 1e-12 * (1.0 + obj.abs()) {
                    beta = cand;
                    eta = cand_eta;
                    obj = cand_obj;
                    break;
                }
                halvings += 1;
                if halvings > self.opts.max_halvings {
                    // No ascent direction left at working precision.
                    return Ok(IrlsOutcome { beta, iterations: iter + 1, penalized: penalty > 0.0, ridged });
                }
                t *= 0.5;
            }
        }
        Err(LearnError::NonConvergence { iterations: self.opts.max_iter, score_norm })
    }

    fn separated(&self, beta: &DVector<f64>) -> bool {
        let xb = &self.x * beta;
        xb.iter().zip(&self.w).any(|(e, &w)| w > 0.0 && e.abs() > SEPARATION_ETA)
    }
}

/// IRLS on a standardised design restricted to `rows`. `y`, `w` and
/// `offset` are indexed like the design's rows.
pub(crate) fn irls_on_design(
    design: &DMatrix<f64>,
    rows: &[usize],
    y: &[f64],
    w: &[f64],
    offset: Option<&[f64]>,
    opts: &IrlsOptions,
) -> Result<IrlsOutcome, LearnError> {
    let q = design.ncols();
    let m = rows.len();
    let prob = Problem {
        x: DMatrix::from_fn(m, q, |i, j| design[(rows[i], j)]),
        y: rows.iter().map(|&i| y[i]).collect(),
        w: rows.iter().map(|&i| w[i]).collect(),
        off: rows.iter().map(|&i| offset.map_or(0.0, |o| o[i])).collect(),
        intercept: opts.intercept,
        opts,
    };
    if prob.y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(LearnError::Shape("logistic outcomes must lie in [0,1]".into()));
    }
    if prob.off.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::Shape("offsets must be finite".into()));
    }
    let wsum = check_weights(&prob.w)?;
    match prob.run(0.0, wsum) {
        Ok(fit) if !prob.separated(&fit.beta) => Ok(fit),
        _ => prob.run(SEPARATION_PENALTY * wsum, wsum),
    }
}

/// Weighted logistic regression of `y` on `features` plus an intercept with
/// an optional offset in the linear predictor.
pub fn fit_logistic_irls(
    features: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    offset: Option<&[f64]>,
) -> Result<Predictor, LearnError> {
    fit_logistic_with(features, y, w, offset, Basis::Main, &IrlsOptions::default())
}

/// As [`fit_logistic_irls`] with an explicit basis and solver options.
pub fn fit_logistic_with(
    raw: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    offset: Option<&[f64]>,
    basis: Basis,
    opts: &IrlsOptions,
) -> Result<Predictor, LearnError> {
    let n = raw.nrows();
    if y.len() != n || w.len() != n || offset.is_some_and(|o| o.len() != n) {
        return Err(LearnError::Shape(format!("{n} rows but {} outcomes / {} weights", y.len(), w.len())));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    let e = expand_matrix(raw, basis);
    Ok(Predictor::Logistic(logistic_on_expanded(&e, &rows, y, w, offset, basis, opts)?))
}

/// Logistic fit on an already expanded design over the training `rows`.
pub(crate) fn logistic_on_expanded(
    e: &DMatrix<f64>,
    rows: &[usize],
    y: &[f64],
    w: &[f64],
    offset: Option<&[f64]>,
    basis: Basis,
    opts: &IrlsOptions,
) -> Result<GlmFit, LearnError> {
    if rows.is_empty() {
        return Err(LearnError::AllZeroWeights);
    }
    let scaling = Scaling::fit(e, Some(rows), opts.intercept);
    let sub = e.select_rows(rows);
    let design = scaling.design(&sub, opts.intercept);
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let ws: Vec<f64> = rows.iter().map(|&i| w[i]).collect();
    let os: Option<Vec<f64>> = offset.map(|o| rows.iter().map(|&i| o[i]).collect());
    let local: Vec<usize> = (0..rows.len()).collect();
    let out = irls_on_design(&design, &local, &ys, &ws, os.as_deref(), opts)?;
    Ok(GlmFit {
        basis,
        scaling,
        beta: out.beta.iter().copied().collect(),
        intercept: opts.intercept,
        ridged: out.ridged,
        penalized: out.penalized,
        iterations: out.iterations,
    })
}
