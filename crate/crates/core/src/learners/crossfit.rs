//! Out-of-fold prediction for nuisance regressions.
//!
//! Rows are grouped into atoms (the outer folds). Every fit trains on a
//! union of atoms, identified by a bitmask, so fits shared between the
//! outer split and the super learner's inner split are computed once.
//! Least-squares candidates accumulate one Gram matrix per atom and solve
//! on sums of them.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::basis::expand_matrix;
use super::folds::{make_folds, FoldAssignment};
use super::linalg::{solve_normal, Scaling};
use super::logistic::{logistic_on_expanded, IrlsOptions};
use super::model::{expit, Candidate, Family, GlmFit, LearnerSpec};
use super::stack::{simplex_weights, Loss};
use crate::error::LearnError;

/// Internal folds used by the super learner in no-split mode.
pub const NO_SPLIT_INNER_FOLDS: usize = 5;
const MAX_ATOMS: usize = 63;

/// How nuisance predictions are separated from the rows they are trained on.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossFitPlan {
    /// Each row is predicted by models trained on the other folds. A
    /// stacked learner scores its candidates by cross-validation over those
    /// other folds.
    Folds(FoldAssignment),
    /// Train on every eligible row and predict every row; stacking uses
    /// internal folds drawn with `seed`.
    NoSplit { seed: u64 },
}

impl CrossFitPlan {
    pub fn is_cross_fitted(&self) -> bool {
        matches!(self, CrossFitPlan::Folds(_))
    }
}

/// A regression problem. Rows with zero weight are never trained on, and
/// their `y` is never read.
#[derive(Debug, Clone, Copy)]
pub struct FitTarget<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub w: &'a [f64],
    /// Fixed offset on the logit scale (logistic candidates only).
    pub offset: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitOutput {
    pub predictions: Vec<f64>,
    /// Stacking weights per training task (empty for single learners).
    pub stack_weights: Vec<Vec<f64>>,
    /// Candidates dropped from at least one task.
    pub dropped: Vec<String>,
}

struct Task {
    train: u64,
    predict: Vec<usize>,
    inner: Vec<(u64, Vec<usize>)>,
}

struct Layout {
    atom: Vec<usize>,
    n_atoms: usize,
    tasks: Vec<Task>,
}

fn bit(a: usize) -> u64 {
    1u64 << a
}

fn layout(plan: &CrossFitPlan, eligible: &[usize], n: usize, stack: bool) -> Result<Layout, LearnError> {
    match plan {
        CrossFitPlan::Folds(f) => {
            if f.n() != n {
                return Err(LearnError::Shape(format!("fold assignment covers {} rows, data has {n}", f.n())));
            }
            if f.k > MAX_ATOMS {
                return Err(LearnError::KTooLarge { k: f.k, n });
            }
            if stack && f.k < 3 {
                return Err(LearnError::TooFewFoldsForStacking(f.k));
            }
            let full = bit(f.k) - 1;
            let mut held: Vec<Vec<usize>> = vec![Vec::new(); f.k];
            for &i in eligible {
                held[f.fold[i]].push(i);
            }
            let tasks = (0..f.k)
                .map(|k| {
                    let train = full & !bit(k);
                    let inner = if stack {
                        (0..f.k).filter(|&j| j != k).map(|j| (train & !bit(j), held[j].clone())).collect()
                    } else {
                        Vec::new()
                    };
                    Task { train, predict: f.rows_in(k), inner }
                })
                .collect();
            Ok(Layout { atom: f.fold.clone(), n_atoms: f.k, tasks })
        }
        CrossFitPlan::NoSplit { seed } => {
            let mut atom = vec![0; n];
            let mut n_atoms = 1;
            let mut inner = Vec::new();
            if stack {
                let k = NO_SPLIT_INNER_FOLDS.min(eligible.len());
                let f = make_folds(eligible.len(), k, *seed, None)?;
                for (pos, &i) in eligible.iter().enumerate() {
                    atom[i] = f.fold[pos];
                }
                n_atoms = k;
                let full = bit(k) - 1;
                for j in 0..k {
                    let rows = f.rows_in(j).into_iter().map(|pos| eligible[pos]).collect();
                    inner.push((full & !bit(j), rows));
                }
            }
            let task = Task { train: bit(n_atoms) - 1, predict: (0..n).collect(), inner };
            Ok(Layout { atom, n_atoms, tasks: vec![task] })
        }
    }
}

enum Engine {
    Linear {
        d: DMatrix<f64>,
        grams: Vec<(DMatrix<f64>, DVector<f64>)>,
        memo: HashMap<u64, Result<DVector<f64>, LearnError>>,
    },
    Logistic {
        cand: Candidate,
        e: DMatrix<f64>,
        memo: HashMap<u64, Result<GlmFit, LearnError>>,
    },
}

impl Engine {
    fn new(cand: Candidate, t: &FitTarget<'_>, eligible: &[usize], lay: &Layout) -> Self {
        let e = expand_matrix(t.x, cand.basis);
        match cand.family {
            Family::Gaussian => {
                // Global standardisation only conditions the problem; each
                // fit re-standardises on its own training rows.
                let d = Scaling::fit(&e, Some(eligible), true).design(&e, true);
                let q = d.ncols();
                let mut grams = vec![(DMatrix::zeros(q, q), DVector::zeros(q)); lay.n_atoms];
                let mut by_atom: Vec<Vec<usize>> = vec![Vec::new(); lay.n_atoms];
                for &i in eligible {
                    by_atom[lay.atom[i]].push(i);
                }
                for (a, rows) in by_atom.iter().enumerate() {
                    if rows.is_empty() {
                        continue;
                    }
                    let m = rows.len();
                    let sw: Vec<f64> = rows.iter().map(|&i| t.w[i].sqrt()).collect();
                    let sub = DMatrix::from_fn(m, q, |r, j| d[(rows[r], j)] * sw[r]);
                    let yw = DVector::from_fn(m, |r, _| t.y[rows[r]] * sw[r]);
                    grams[a] = (sub.tr_mul(&sub), sub.tr_mul(&yw));
                }
                Engine::Linear { d, grams, memo: HashMap::new() }
            }
            Family::Binomial => Engine::Logistic { cand, e, memo: HashMap::new() },
        }
    }

    fn predict(&mut self, mask: u64, rows: &[usize], t: &FitTarget<'_>, lay: &Layout) -> Result<Vec<f64>, LearnError> {
        match self {
            Engine::Linear { d, grams, memo } => {
                let beta = memo.entry(mask).or_insert_with(|| solve_mask(grams, mask)).clone()?;
                Ok(rows.iter().map(|&i| d.row(i).transpose().dot(&beta)).collect())
            }
            Engine::Logistic { cand, e, memo } => {
                let fit = memo
                    .entry(mask)
                    .or_insert_with(|| {
                        let train: Vec<usize> =
                            (0..t.y.len()).filter(|&i| t.w[i] > 0.0 && mask & bit(lay.atom[i]) != 0).collect();
                        logistic_on_expanded(e, &train, t.y, t.w, t.offset, cand.basis, &IrlsOptions::default())
                    })
                    .as_ref()
                    .map_err(Clone::clone)?;
                let lp = fit.linear_predictor_expanded(&e.select_rows(rows));
                Ok(rows
                    .iter()
                    .zip(lp)
                    .map(|(&i, l)| expit(l + t.offset.map_or(0.0, |o| o[i])))
                    .collect())
            }
        }
    }
}

/// Weighted least squares from summed per-atom Gram matrices, standardised
/// by the weighted moments of the training rows.
fn solve_mask(grams: &[(DMatrix<f64>, DVector<f64>)], mask: u64) -> Result<DVector<f64>, LearnError> {
    let q = grams[0].0.nrows();
    let mut g = DMatrix::zeros(q, q);
    let mut b = DVector::zeros(q);
    for (a, (ga, ba)) in grams.iter().enumerate() {
        if mask & bit(a) != 0 {
            g += ga;
            b += ba;
        }
    }
    let wsum = g[(0, 0)];
    if wsum <= 0.0 {
        return Err(LearnError::AllZeroWeights);
    }
    let mean: Vec<f64> = (0..q).map(|c| g[(0, c)] / wsum).collect();
    let active: Vec<usize> = (1..q)
        .filter(|&c| g[(c, c)] / wsum - mean[c] * mean[c] > 1e-10)
        .collect();
    let sd: Vec<f64> = active.iter().map(|&c| (g[(c, c)] / wsum - mean[c] * mean[c]).sqrt()).collect();
    let m = active.len() + 1;
    let mut gs = DMatrix::zeros(m, m);
    let mut bs = DVector::zeros(m);
    gs[(0, 0)] = wsum;
    bs[0] = b[0];
    for (r, &c) in active.iter().enumerate() {
        bs[r + 1] = (b[c] - mean[c] * b[0]) / sd[r];
        for (s, &e) in active.iter().enumerate() {
            gs[(r + 1, s + 1)] = (g[(c, e)] - wsum * mean[c] * mean[e]) / (sd[r] * sd[s]);
        }
    }
    let (beta, ridged) = solve_normal(&gs, &bs, true);
    if ridged {
        log::debug!("ridge fallback used in cross-fit least squares");
    }
    let mut out = DVector::zeros(q);
    out[0] = beta[0];
    for (r, &c) in active.iter().enumerate() {
        out[c] = beta[r + 1] / sd[r];
        out[0] -= out[c] * mean[c];
    }
    Ok(out)
}

/// Fits `spec` under `plan` and returns a prediction for every row.
pub fn cross_fit(spec: &LearnerSpec, t: FitTarget<'_>, plan: &CrossFitPlan, loss: Loss) -> Result<CrossFitOutput, LearnError> {
    let n = t.x.nrows();
    if t.y.len() != n || t.w.len() != n || t.offset.is_some_and(|o| o.len() != n) {
        return Err(LearnError::Shape(format!("{n} rows, {} outcomes, {} weights", t.y.len(), t.w.len())));
    }
    if t.w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(LearnError::Shape("weights must be finite and non-negative".into()));
    }
    let eligible: Vec<usize> = (0..n).filter(|&i| t.w[i] > 0.0).collect();
    if eligible.is_empty() {
        return Err(LearnError::AllZeroWeights);
    }
    let cands = spec.candidates();
    let stack = cands.len() > 1;
    let lay = layout(plan, &eligible, n, stack)?;
    let mut engines: Vec<Engine> = cands.iter().map(|&c| Engine::new(c, &t, &eligible, &lay)).collect();

    let mut predictions = vec![f64::NAN; n];
    let mut stack_weights = Vec::new();
    let mut dropped: Vec<String> = Vec::new();
    for task in &lay.tasks {
        if !stack {
            let p = engines[0].predict(task.train, &task.predict, &t, &lay)?;
            for (&i, v) in task.predict.iter().zip(p) {
                predictions[i] = v;
            }
            continue;
        }
        let inner_rows: Vec<usize> = task.inner.iter().flat_map(|(_, r)| r.iter().copied()).collect();
        let mut kept = Vec::new();
        let mut oof = Vec::new();
        let mut outer = Vec::new();
        let mut last_err = None;
        for (ci, eng) in engines.iter_mut().enumerate() {
            let attempt = (|| {
                let mut o = Vec::with_capacity(inner_rows.len());
                for (mask, rows) in &task.inner {
                    o.extend(eng.predict(*mask, rows, &t, &lay)?);
                }
                let full = eng.predict(task.train, &task.predict, &t, &lay)?;
                Ok::<_, LearnError>((o, full))
            })();
            match attempt {
                Ok((o, full)) => {
                    kept.push(ci);
                    oof.push(o);
                    outer.push(full);
                }
                Err(e) => {
                    let name = cands[ci].name().to_string();
                    log::warn!("dropping candidate {name}: {e}");
                    if !dropped.contains(&name) {
                        dropped.push(name);
                    }
                    last_err = Some(e);
                }
            }
        }
        if kept.is_empty() {
            let why = last_err.map_or_else(String::new, |e| e.to_string());
            return Err(LearnError::SuperLearnerFailed(format!("all candidates failed ({why})")));
        }
        let yi: Vec<f64> = inner_rows.iter().map(|&i| t.y[i]).collect();
        let vi: Vec<f64> = inner_rows.iter().map(|&i| t.w[i]).collect();
        let (alpha, _) = simplex_weights(&oof, &yi, &vi, loss);
        for (pos, &i) in task.predict.iter().enumerate() {
            predictions[i] = outer.iter().zip(&alpha).map(|(p, a)| a * p[pos]).sum();
        }
        let mut full_alpha = vec![0.0; cands.len()];
        for (k, &ci) in kept.iter().enumerate() {
            full_alpha[ci] = alpha[k];
        }
        stack_weights.push(full_alpha);
    }
    Ok(CrossFitOutput { predictions, stack_weights, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::basis::Basis;
    use crate::learners::stack::fit_candidate;

    fn data(n: usize) -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_fn(n, 2, |i, j| (((i * 31 + j * 17) % 97) as f64) / 97.0);
        let y = (0..n).map(|i| 1.0 + x[(i, 0)] - 2.0 * x[(i, 1)].powi(2) + 0.1 * ((i % 5) as f64)).collect();
        (x, y)
    }

    #[test]
    fn single_linear_matches_direct_fold_fits() {
        let n = 60;
        let (x, y) = data(n);
        let w: Vec<f64> = (0..n).map(|i| if i % 4 == 0 { 0.0 } else { 1.0 + (i % 3) as f64 }).collect();
        let folds = make_folds(n, 4, 5, None).unwrap();
        let cand = Candidate::new(Family::Gaussian, Basis::Poly3);
        let t = FitTarget { x: &x, y: &y, w: &w, offset: None };
        let out = cross_fit(&LearnerSpec::Single(cand), t, &CrossFitPlan::Folds(folds.clone()), Loss::Squared).unwrap();
        for k in 0..4 {
            let wk: Vec<f64> = (0..n).map(|i| if folds.fold[i] == k { 0.0 } else { w[i] }).collect();
            let direct = fit_candidate(cand, &x, &y, &wk).unwrap();
            let rows = folds.rows_in(k);
            for (&i, p) in rows.iter().zip(direct.predict(&x.select_rows(&rows))) {
                assert!((out.predictions[i] - p).abs() < 1e-9, "row {i}: {} vs {p}", out.predictions[i]);
            }
        }
    }

    #[test]
    fn logistic_engine_matches_direct_fit() {
        let n = 80;
        let (x, _) = data(n);
        let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from((i * 7) % 3 == 0 || x[(i, 0)] > 0.7))).collect();
        let off: Vec<f64> = (0..n).map(|i| 0.1 * (i % 4) as f64).collect();
        let w = vec![1.0; n];
        let cand = Candidate::new(Family::Binomial, Basis::Main);
        let t = FitTarget { x: &x, y: &y, w: &w, offset: Some(&off) };
        let out = cross_fit(&LearnerSpec::Single(cand), t, &CrossFitPlan::NoSplit { seed: 1 }, Loss::Bernoulli).unwrap();
        let direct = crate::learners::fit_logistic_irls(&x, &y, &w, Some(&off)).unwrap();
        for (a, b) in out.predictions.iter().zip(direct.predict_with_offset(&x, &off)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stacks_need_three_folds() {
        let (x, y) = data(20);
        let w = vec![1.0; 20];
        let t = FitTarget { x: &x, y: &y, w: &w, offset: None };
        let plan = CrossFitPlan::Folds(make_folds(20, 2, 1, None).unwrap());
        let err = cross_fit(&LearnerSpec::default_continuous(), t, &plan, Loss::Squared).unwrap_err();
        assert_eq!(err, LearnError::TooFewFoldsForStacking(2));
    }

    #[test]
    fn permuting_within_a_fold_leaves_other_folds_alone() {
        let n = 90;
        let (x, y) = data(n);
        let w = vec![1.0; n];
        let folds = make_folds(n, 3, 8, None).unwrap();
        let spec = LearnerSpec::default_continuous();
        let base = cross_fit(&spec, FitTarget { x: &x, y: &y, w: &w, offset: None }, &CrossFitPlan::Folds(folds.clone()), Loss::Squared).unwrap();

        // Reverse the order of fold 0's rows.
        let f0 = folds.rows_in(0);
        let mut perm: Vec<usize> = (0..n).collect();
        for (a, b) in f0.iter().zip(f0.iter().rev()) {
            perm[*a] = *b;
        }
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let out = cross_fit(&spec, FitTarget { x: &xp, y: &yp, w: &w, offset: None }, &CrossFitPlan::Folds(folds.clone()), Loss::Squared).unwrap();
        for i in 0..n {
            if folds.fold[i] != 0 {
                assert!((out.predictions[i] - base.predictions[i]).abs() < 1e-10);
            }
        }
    }
}
