//! Cross-validated stacking over a menu of candidate learners.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::folds::FoldAssignment;
use super::logistic::{fit_logistic_with, IrlsOptions};
use super::model::{Candidate, Family, Predictor, StackedModel};
use super::wls::fit_wls_basis;
use crate::error::LearnError;

const EG_ITERS: usize = 500;
const EG_STEP: f64 = 0.1;
const EG_TOL: f64 = 1e-10;
const SQP_ITERS: usize = 50;
const PROB_FLOOR: f64 = 1e-12;

/// Loss used to score out-of-fold predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Squared,
    /// Bernoulli deviance; predictions are read as probabilities.
    Bernoulli,
}

impl Loss {
    pub fn eval(self, y: f64, p: f64) -> f64 {
        match self {
            Loss::Squared => (y - p).powi(2),
            Loss::Bernoulli => {
                let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
        }
    }

    fn second_deriv(self, y: f64, p: f64) -> f64 {
        match self {
            Loss::Squared => 2.0,
            Loss::Bernoulli => {
                let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                2.0 * (y / (p * p) + (1.0 - y) / ((1.0 - p) * (1.0 - p)))
            }
        }
    }

    fn deriv(self, y: f64, p: f64) -> f64 {
        match self {
            Loss::Squared => 2.0 * (p - y),
            Loss::Bernoulli => {
                let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -2.0 * (y / p - (1.0 - y) / (1.0 - p))
            }
        }
    }
}

fn weighted_loss(preds: &[Vec<f64>], alpha: &[f64], y: &[f64], v: &[f64], loss: Loss) -> f64 {
    let vs: f64 = v.iter().sum();
    let mut total = 0.0;
    for i in 0..y.len() {
        let p: f64 = preds.iter().zip(alpha).map(|(c, a)| a * c[i]).sum();
        total += v[i] * loss.eval(y[i], p);
    }
    total / vs
}

/// `a' G a - 2 a'b` over the simplex.
struct Quadratic {
    gram: DMatrix<f64>,
    cross: Vec<f64>,
}

impl Quadratic {
    fn value(&self, a: &[f64]) -> f64 {
        let c = a.len();
        let mut q = 0.0;
        for j in 0..c {
            for k in 0..c {
                q += a[j] * self.gram[(j, k)] * a[k];
            }
        }
        q - 2.0 * a.iter().zip(&self.cross).map(|(x, b)| x * b).sum::<f64>()
    }

    fn gradient(&self, a: &[f64]) -> Vec<f64> {
        (0..a.len())
            .map(|j| 2.0 * (0..a.len()).map(|k| self.gram[(j, k)] * a[k]).sum::<f64>() - 2.0 * self.cross[j])
            .collect()
    }

    /// Exponentiated gradient with backtracking, started from `alpha`.
    fn minimize(&self, mut alpha: Vec<f64>) -> Vec<f64> {
        let mut cur = self.value(&alpha);
        let mut step = EG_STEP;
        for _ in 0..EG_ITERS {
            let grad = self.gradient(&alpha);
            let gbar: f64 = grad.iter().zip(&alpha).map(|(g, a)| g * a).sum();
            let spread = grad.iter().map(|g| (g - gbar).abs()).fold(0.0, f64::max);
            if spread <= 0.0 || !spread.is_finite() {
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let mut cand: Vec<f64> =
                    alpha.iter().zip(&grad).map(|(a, g)| a * (-step * (g - gbar) / spread).exp()).collect();
                let s: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|a| *a /= s);
                let l = self.value(&cand);
                if l <= cur {
                    let gain = cur - l;
                    alpha = cand;
                    cur = l;
                    accepted = gain > EG_TOL * cur.abs().max(1e-12);
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            step = (step * 2.0).min(EG_STEP);
        }
        alpha
    }
}

/// Second-order model of the weighted loss around `alpha`, written as a
/// [`Quadratic`] in the new weights. Exact for squared loss.
fn local_quadratic(preds: &[Vec<f64>], alpha: &[f64], y: &[f64], v: &[f64], loss: Loss) -> Quadratic {
    let c = preds.len();
    let vs: f64 = v.iter().sum();
    let mut grad = vec![0.0; c];
    let mut hess = DMatrix::<f64>::zeros(c, c);
    for i in 0..y.len() {
        let p: f64 = preds.iter().zip(alpha).map(|(cp, a)| a * cp[i]).sum();
        let d1 = v[i] * loss.deriv(y[i], p) / vs;
        let d2 = v[i] * loss.second_deriv(y[i], p) / vs;
        for j in 0..c {
            grad[j] += d1 * preds[j][i];
            for k in 0..=j {
                hess[(j, k)] += d2 * preds[j][i] * preds[k][i];
            }
        }
    }
    for j in 0..c {
        for k in 0..j {
            hess[(k, j)] = hess[(j, k)];
        }
    }
    // g'(b - a) + (b - a)'H(b - a)/2 = b'(H/2)b - b'(Ha - g) + const
    let ha: DVector<f64> = &hess * DVector::from_column_slice(alpha);
    let cross = (0..c).map(|j| (ha[j] - grad[j]) / 2.0).collect();
    Quadratic { gram: hess / 2.0, cross }
}

/// Simplex weights minimising the weighted loss of the combined
/// predictions `preds[c][i]`, by sequential quadratic steps with a
/// backtracking line search. The result is never worse than the best
/// single candidate. Returns the weights and their loss.
pub(crate) fn simplex_weights(preds: &[Vec<f64>], y: &[f64], v: &[f64], loss: Loss) -> (Vec<f64>, f64) {
    let c = preds.len();
    let keep: Vec<usize> = (0..y.len()).filter(|&i| v[i] > 0.0).collect();
    let preds: Vec<Vec<f64>> = preds.iter().map(|p| keep.iter().map(|&i| p[i]).collect()).collect();
    let y: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    let v: Vec<f64> = keep.iter().map(|&i| v[i]).collect();
    let vertex_losses: Vec<f64> = (0..c)
        .map(|j| {
            let mut e = vec![0.0; c];
            e[j] = 1.0;
            weighted_loss(&preds, &e, &y, &v, loss)
        })
        .collect();
    let best = (0..c)
        .min_by(|&a, &b| vertex_losses[a].total_cmp(&vertex_losses[b]))
        .expect("at least one candidate");
    let mut vertex = vec![0.0; c];
    vertex[best] = 1.0;
    if c == 1 {
        return (vertex, vertex_losses[0]);
    }

    let mut alpha = vec![1.0 / c as f64; c];
    let mut cur = weighted_loss(&preds, &alpha, &y, &v, loss);
    for _ in 0..SQP_ITERS {
        let target = local_quadratic(&preds, &alpha, &y, &v, loss).minimize(alpha.clone());
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let cand: Vec<f64> = alpha.iter().zip(&target).map(|(a, b)| a + t * (b - a)).collect();
            let l = weighted_loss(&preds, &cand, &y, &v, loss);
            if l <= cur {
                moved = cur - l > EG_TOL * cur.abs().max(1e-12);
                alpha = cand;
                cur = l;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if vertex_losses[best] <= cur {
        (vertex, vertex_losses[best])
    } else {
        (alpha, cur)
    }
}

pub(crate) fn fit_candidate(c: Candidate, raw: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<Predictor, LearnError> {
    match c.family {
        Family::Gaussian => fit_wls_basis(raw, y, w, c.basis),
        Family::Binomial => fit_logistic_with(raw, y, w, None, c.basis, &IrlsOptions::default()),
    }
}

/// Super learner: scores each candidate by out-of-fold loss over `folds`,
/// chooses simplex weights over the candidates, then refits every
/// surviving candidate on all rows with positive weight.
pub fn fit_super_learner(
    candidates: &[Candidate],
    features: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    folds: &FoldAssignment,
    loss: Loss,
) -> Result<Predictor, LearnError> {
    let n = features.nrows();
    if candidates.is_empty() {
        return Err(LearnError::SuperLearnerFailed("empty candidate list".into()));
    }
    if y.len() != n || w.len() != n || folds.n() != n {
        return Err(LearnError::Shape(format!("{n} rows, {} outcomes, {} weights, {} folds", y.len(), w.len(), folds.n())));
    }
    let used: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    if used.is_empty() {
        return Err(LearnError::AllZeroWeights);
    }

    let mut names = Vec::new();
    let mut oof_kept = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &c in candidates {
        match out_of_fold(c, features, y, w, folds) {
            Ok(p) => {
                oof_kept.push(used.iter().map(|&i| p[i]).collect::<Vec<_>>());
                kept.push(c);
                names.push(c.name().to_string());
            }
            Err(e) => {
                log::warn!("dropping candidate {}: {e}", c.name());
                dropped.push(c.name().to_string());
            }
        }
    }
    if kept.is_empty() {
        return Err(LearnError::SuperLearnerFailed(format!("all candidates failed: {}", dropped.join(", "))));
    }
    let yu: Vec<f64> = used.iter().map(|&i| y[i]).collect();
    let vu: Vec<f64> = used.iter().map(|&i| w[i]).collect();
    let (weights, cv_loss) = simplex_weights(&oof_kept, &yu, &vu, loss);

    let components = kept
        .iter()
        .map(|&c| fit_candidate(c, features, y, w))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Predictor::Stacked(StackedModel { names, components, weights, dropped, cv_loss }))
}

fn out_of_fold(c: Candidate, x: &DMatrix<f64>, y: &[f64], w: &[f64], folds: &FoldAssignment) -> Result<Vec<f64>, LearnError> {
    let n = x.nrows();
    let mut out = vec![f64::NAN; n];
    for k in 0..folds.k {
        let test = folds.rows_in(k);
        if test.is_empty() {
            continue;
        }
        let wk: Vec<f64> = (0..n).map(|i| if folds.fold[i] == k { 0.0 } else { w[i] }).collect();
        let fit = fit_candidate(c, x, y, &wk)?;
        let pred = fit.predict(&x.select_rows(&test));
        for (&i, p) in test.iter().zip(pred) {
            out[i] = p;
        }
    }
    Ok(out)
}
