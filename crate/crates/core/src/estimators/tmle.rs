//! Targeted maximum likelihood for the Approach 2 parameterisation.
//!
//! Two logistic fluctuations are alternated until neither moves: one of the
//! sampling probabilities kappa, one of the (rescaled) outcome regression
//! m_a. At the fixed point the estimated influence function has empirical
//! mean zero at the updated nuisances.

use nalgebra::{DMatrix, DVector};

use super::inference::{finish, mean, sample_variance};
use super::onestep::eic_approach2;
use crate::error::{EstimateError, LearnError};
use crate::learners::{expit, fit_logistic_with, logit, Basis, IrlsOptions};
use crate::nuisance::NuisanceSet;
use crate::types::{Arm, Dataset, Estimand, EstimateResult, MethodTag};

#[derive(Debug, Clone, PartialEq)]
pub struct TmleOptions {
    pub max_iter: usize,
    /// Stop once every fluctuation coefficient is below this in magnitude.
    pub tol: f64,
    /// Relative margin added on both sides of the validated outcome range.
    pub margin: f64,
}

impl Default for TmleOptions {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-9, margin: 0.01 }
    }
}

const PROB_BOUND: f64 = 1e-9;
const KAPPA_NEWTON_ITERS: usize = 100;
/// Relative tolerance on the sampling-probability score equations.
const KAPPA_SCORE_TOL: f64 = 1e-12;
/// Rescaled outcome regressions are kept this far inside (0, 1).
const SCALED_BOUND: f64 = 1e-4;

fn no_intercept() -> IrlsOptions {
    IrlsOptions { intercept: false, ..Default::default() }
}

/// Fluctuation of the sampling probabilities along the working model
/// `logit k* = logit kappa + zeta . c / kappa`, one column of `c` per entry
/// of `covariates`.
///
/// zeta solves `sum_{r=1} c_j / k* = sum_all c_j` for every j, which is the
/// part of the estimated influence function that kappa* must zero out.
/// These equations are the gradient of a concave function of zeta, so the
/// root is unique when it exists and Newton's method with a line search
/// finds it. Returns the updated probabilities and zeta.
pub fn fluctuate_kappa(r: &[f64], kappa: &[f64], covariates: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), EstimateError> {
    let n = r.len();
    let q = covariates.len();
    if kappa.len() != n || covariates.iter().any(|c| c.len() != n) {
        return Err(LearnError::Shape(format!("{n} indicators but {} probabilities", kappa.len())).into());
    }
    let base: Vec<f64> = kappa.iter().map(|k| k.clamp(PROB_BOUND, 1.0 - PROB_BOUND)).collect();
    let off: Vec<f64> = base.iter().map(|&k| logit(k)).collect();
    // Columns that vanish on the validated rows cannot move anything.
    let active: Vec<usize> =
        (0..q).filter(|&j| (0..n).any(|i| r[i] > 0.0 && covariates[j][i] != 0.0)).collect();
    let totals: Vec<f64> = active.iter().map(|&j| covariates[j].iter().sum()).collect();
    let scale: Vec<f64> = active.iter().map(|&j| covariates[j].iter().map(|v| v.abs()).sum::<f64>().max(1.0)).collect();

    let eta = |z: &[f64], i: usize| -> f64 { active.iter().zip(z).map(|(&j, zj)| zj * covariates[j][i]).sum::<f64>() / base[i] };
    let objective = |z: &[f64]| -> f64 {
        let mut f = -z.iter().zip(&totals).map(|(a, b)| a * b).sum::<f64>();
        for i in (0..n).filter(|&i| r[i] > 0.0) {
            let e = eta(z, i);
            f += base[i] * (e - (-(off[i] + e)).exp());
        }
        f
    };
    let mut zeta = vec![0.0; active.len()];
    let mut converged = active.is_empty();
    for _ in 0..KAPPA_NEWTON_ITERS {
        if converged {
            break;
        }
        let p = active.len();
        let mut grad = DVector::from_fn(p, |j, _| -totals[j]);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for i in (0..n).filter(|&i| r[i] > 0.0) {
            let inv = 1.0 + (-(off[i] + eta(&zeta, i))).exp();
            for (a, &ja) in active.iter().enumerate() {
                grad[a] += covariates[ja][i] * inv;
                for (b, &jb) in active.iter().enumerate().take(a + 1) {
                    hess[(a, b)] += (inv - 1.0) * covariates[ja][i] * covariates[jb][i] / base[i];
                }
            }
        }
        if (0..p).all(|j| grad[j].abs() <= KAPPA_SCORE_TOL * scale[j]) {
            converged = true;
            break;
        }
        hess.fill_upper_triangle_with_lower_triangle();
        let ridge = 1e-12 * hess.trace().max(f64::MIN_POSITIVE);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => (hess + DMatrix::identity(p, p) * ridge).lu().solve(&grad).unwrap_or_else(|| grad.clone()),
        };
        let f0 = objective(&zeta);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = zeta.iter().zip(step.iter()).map(|(z, s)| z + t * s).collect();
            let f1 = objective(&cand);
            if f1.is_finite() && f1 >= f0 {
                zeta = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(LearnError::NonConvergence { iterations: KAPPA_NEWTON_ITERS, score_norm: grad.amax() }.into());
            }
        }
    }
    if !converged {
        log::warn!("sampling-probability fluctuation did not reach tolerance");
    }
    let updated = (0..n).map(|i| expit(off[i] + eta(&zeta, i)).clamp(PROB_BOUND, 1.0 - PROB_BOUND)).collect();
    let mut coef = vec![0.0; q];
    for (&j, z) in active.iter().zip(&zeta) {
        coef[j] = *z;
    }
    Ok((updated, coef))
}

/// Weighted logistic fluctuation of a [0,1]-scaled regression on the logit
/// scale `lm`, along `h`, over rows with positive weight. Returns the
/// coefficient; `lm` is updated in place for every row.
pub fn fluctuate_outcome(y: &[f64], w: &[f64], lm: &mut [f64], h: &[f64]) -> Result<f64, EstimateError> {
    let n = y.len();
    let x = DMatrix::from_column_slice(n, 1, h);
    let yc: Vec<f64> = y.iter().zip(w).map(|(&v, &wi)| if wi > 0.0 { v } else { 0.0 }).collect();
    let fit = fit_logistic_with(&x, &yc, w, Some(lm), Basis::Main, &no_intercept())?;
    let eps = fit.glm().expect("logistic fit").coefficients()[1];
    for (l, hi) in lm.iter_mut().zip(h) {
        *l += eps * hi;
    }
    Ok(eps)
}

pub fn tmle2(d: &Dataset, set: &NuisanceSet, arm: Arm, level: f64) -> Result<EstimateResult, EstimateError> {
    tmle2_with(d, set, arm, level, &TmleOptions::default())
}

pub fn tmle2_with(
    d: &Dataset,
    set: &NuisanceSet,
    arm: Arm,
    level: f64,
    opts: &TmleOptions,
) -> Result<EstimateResult, EstimateError> {
    let kappa = set.kappa()?;
    let nu = set.arm(arm);
    let (m, g, varphi) = (nu.m()?, nu.g()?, nu.varphi()?);
    let n = d.n();

    let ys: Vec<f64> = d.rows().iter().filter_map(|o| o.y).collect();
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(EstimateError::DegenerateOutcomeRange);
    }
    let lo = lo - opts.margin * (hi - lo);
    let scale = (hi + opts.margin * (hi - lo)) - lo;
    let to_unit = |v: f64| ((v - lo) / scale).clamp(SCALED_BOUND, 1.0 - SCALED_BOUND);
    let from_unit = |v: f64| lo + scale * v;

    let r: Vec<f64> = d.rows().iter().map(|o| f64::from(u8::from(o.r))).collect();
    let in_arm: Vec<bool> = d.rows().iter().map(|o| o.r && o.a.is_some_and(|a| arm.matches(a))).collect();
    let y_unit: Vec<f64> = d.rows().iter().map(|o| o.y.map_or(0.0, to_unit)).collect();
    let h: Vec<f64> = g.iter().map(|gi| 1.0 / gi).collect();

    let mut lm: Vec<f64> = m.iter().map(|&v| logit(to_unit(v))).collect();
    let mut k_star: Vec<f64> = kappa.to_vec();
    let mut prev_zeta = vec![0.0; 2];
    let mut iterations = 0;
    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let m_star: Vec<f64> = lm.iter().map(|&l| from_unit(expit(l))).collect();
        let psi = mean(&m_star);
        // The first covariate is the usual one; the second makes the
        // weighted mean of m* agree with its unweighted mean.
        let c2: Vec<f64> = m_star.iter().map(|v| v - psi).collect();
        let (updated, zeta) = fluctuate_kappa(&r, kappa, &[varphi.to_vec(), c2])?;
        let moved = zeta.iter().zip(&prev_zeta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev_zeta = zeta.clone();
        k_star = updated;
        let w: Vec<f64> = (0..n).map(|i| if in_arm[i] { 1.0 / k_star[i] } else { 0.0 }).collect();
        let eps = fluctuate_outcome(&y_unit, &w, &mut lm, &h)?;
        last = (zeta[0], zeta[1], eps);
        if iterations > 1 && moved < opts.tol && eps.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("tmle fluctuation stopped after {iterations} iterations without converging");
    }

    let m_star: Vec<f64> = lm.iter().map(|&l| from_unit(expit(l))).collect();
    let point = mean(&m_star);
    let ic = eic_approach2(d, &k_star, &m_star, &m_star, g, varphi, arm, point);
    let mean_ic = mean(&ic);
    let sd_ic = sample_variance(&ic).sqrt();
    Ok(finish(Estimand::for_arm(arm), MethodTag::Tmle2, point, ic, level)?
        .with_diagnostic("iterations", iterations)
        .with_diagnostic("converged", converged)
        .with_diagnostic("zeta", last.0)
        .with_diagnostic("zeta_centering", last.1)
        .with_diagnostic("epsilon", last.2)
        .with_diagnostic("mean_ic", mean_ic)
        .with_diagnostic("sd_ic", sd_ic))
}
