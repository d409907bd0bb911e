//! Nuisance functions for both identification strategies, fitted with
//! cross-fitting.
//!
//! Per arm a: the outcome and treatment imputations mu_a(Z), lambda_a(Z);
//! their marginalisations eta_a(X), pi_a(X); the inverse-weighted
//! full-data regressions m_a(X), g_a(X); and the pseudo-outcome regression
//! varphi_a(Z). Shared: the sampling probability kappa(Z).

use nalgebra::DMatrix;

use crate::error::{DataError, EstimateError};
use crate::learners::{
    cross_fit, logit, make_folds, Basis, Candidate, CrossFitPlan, Family, FitTarget, LearnerMenu, LearnerSpec, Loss,
};
use crate::types::{Arm, Dataset, KappaMode, Observation, ScenarioConfig};

/// Threshold below which |R/kappa - 1| is treated as zero in the EEM
/// transformation.
pub const EEM_ZERO: f64 = 1e-8;
/// Bound used to keep the designed log-odds finite when it enters a fit as
/// an offset.
const OFFSET_BOUND: f64 = 1e-9;

pub fn clip(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// Settings shared by every nuisance fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceOptions {
    /// Cross-fitting folds; 1 disables sample splitting.
    pub folds: usize,
    pub clip_eps: f64,
    pub kappa_mode: KappaMode,
    pub menu: LearnerMenu,
    /// Seed for fold assignment.
    pub seed: u64,
}

impl Default for NuisanceOptions {
    fn default() -> Self {
        Self { folds: 5, clip_eps: 0.01, kappa_mode: KappaMode::Known, menu: LearnerMenu::default(), seed: 0 }
    }
}

impl NuisanceOptions {
    pub fn from_config(c: &ScenarioConfig, seed: u64) -> Self {
        Self { folds: c.folds, clip_eps: c.clip_eps, kappa_mode: c.kappa_mode, menu: c.learner_menu.clone(), seed }
    }

    /// Fold plan for a dataset. Folds are stratified by R.
    pub fn plan(&self, d: &Dataset) -> Result<CrossFitPlan, EstimateError> {
        if self.folds <= 1 {
            Ok(CrossFitPlan::NoSplit { seed: self.seed })
        } else {
            Ok(CrossFitPlan::Folds(make_folds(d.n(), self.folds, self.seed, Some(&d.r()))?))
        }
    }
}

/// Which groups of nuisances to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    pub approach1: bool,
    pub approach2: bool,
    pub varphi_conventional: bool,
    pub varphi_eem: bool,
}

impl Needs {
    pub const ALL: Needs = Needs { approach1: true, approach2: true, varphi_conventional: true, varphi_eem: true };
}

/// Per-row predictions for one arm. Absent groups were not requested.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmNuisance {
    pub mu: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub pi: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
    /// chi centred at the alternative plug-in; NaN on unvalidated rows.
    pub chi: Option<Vec<f64>>,
    pub varphi: Option<Vec<f64>>,
    pub varphi_eem: Option<Vec<f64>>,
}

fn need<'a>(v: &'a Option<Vec<f64>>, name: &'static str) -> Result<&'a [f64], EstimateError> {
    v.as_deref().ok_or(EstimateError::MissingNuisance(name))
}

impl ArmNuisance {
    pub fn mu(&self) -> Result<&[f64], EstimateError> {
        need(&self.mu, "mu")
    }
    pub fn lambda(&self) -> Result<&[f64], EstimateError> {
        need(&self.lambda, "lambda")
    }
    pub fn eta(&self) -> Result<&[f64], EstimateError> {
        need(&self.eta, "eta")
    }
    pub fn pi(&self) -> Result<&[f64], EstimateError> {
        need(&self.pi, "pi")
    }
    pub fn m(&self) -> Result<&[f64], EstimateError> {
        need(&self.m, "m")
    }
    pub fn g(&self) -> Result<&[f64], EstimateError> {
        need(&self.g, "g")
    }
    pub fn chi(&self) -> Result<&[f64], EstimateError> {
        need(&self.chi, "chi")
    }
    pub fn varphi(&self) -> Result<&[f64], EstimateError> {
        need(&self.varphi, "varphi")
    }
    pub fn varphi_eem(&self) -> Result<&[f64], EstimateError> {
        need(&self.varphi_eem, "varphi_eem")
    }
}

/// Every fitted nuisance, indexed by arm via [`Arm::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSet {
    pub kappa: Option<Vec<f64>>,
    pub arms: [ArmNuisance; 2],
    pub kappa_mode: KappaMode,
    pub cross_fitted: bool,
    pub clip_eps: f64,
}

impl NuisanceSet {
    pub fn empty(kappa_mode: KappaMode, clip_eps: f64) -> Self {
        Self { kappa: None, arms: Default::default(), kappa_mode, cross_fitted: false, clip_eps }
    }

    pub fn arm(&self, a: Arm) -> &ArmNuisance {
        &self.arms[a.index()]
    }

    pub fn arm_mut(&mut self, a: Arm) -> &mut ArmNuisance {
        &mut self.arms[a.index()]
    }

    pub fn kappa(&self) -> Result<&[f64], EstimateError> {
        need(&self.kappa, "kappa")
    }
}

fn r_f64(d: &Dataset) -> Vec<f64> {
    d.rows().iter().map(|o| f64::from(u8::from(o.r))).collect()
}

fn gold_y(o: &Observation) -> f64 {
    o.y.unwrap_or(f64::NAN)
}

fn arm_rows_exist(d: &Dataset, arm: Arm) -> Result<(), EstimateError> {
    if d.rows().iter().any(|o| o.r && o.a.is_some_and(|a| arm.matches(a))) {
        Ok(())
    } else {
        Err(DataError::EmptyArm { arm: u8::from(arm.is_treated()) }.into())
    }
}

/// Sampling probabilities per row, clipped to `[clip_eps, 1]`.
pub fn fit_kappa(
    d: &Dataset,
    mode: KappaMode,
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
    clip_eps: f64,
) -> Result<Vec<f64>, EstimateError> {
    let known = || -> Result<Vec<f64>, EstimateError> {
        d.rows()
            .iter()
            .map(|o| o.kappa_known.ok_or(EstimateError::MissingKappa(mode.as_str())))
            .collect()
    };
    let raw = match mode {
        KappaMode::Known => known()?,
        KappaMode::KnownRefit => {
            let offset: Vec<f64> = known()?.iter().map(|&k| logit(k.clamp(OFFSET_BOUND, 1.0 - OFFSET_BOUND))).collect();
            let z = d.z_matrix();
            let r = r_f64(d);
            let w = vec![1.0; d.n()];
            let spec = LearnerSpec::Single(Candidate::new(Family::Binomial, Basis::Main));
            let t = FitTarget { x: &z, y: &r, w: &w, offset: Some(&offset) };
            cross_fit(&spec, t, plan, Loss::Bernoulli)?.predictions
        }
        KappaMode::Estimated => {
            let z = d.z_matrix();
            let r = r_f64(d);
            let w = vec![1.0; d.n()];
            cross_fit(learner, FitTarget { x: &z, y: &r, w: &w, offset: None }, plan, Loss::Bernoulli)?.predictions
        }
    };
    Ok(raw.into_iter().map(|k| k.clamp(clip_eps, 1.0)).collect())
}

/// mu_a(Z): regression of Y on Z among validated rows in arm `a`.
pub fn fit_outcome_imputation(
    d: &Dataset,
    z: &DMatrix<f64>,
    arm: Arm,
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
) -> Result<Vec<f64>, EstimateError> {
    arm_rows_exist(d, arm)?;
    let y: Vec<f64> = d.rows().iter().map(gold_y).collect();
    let w: Vec<f64> =
        d.rows().iter().map(|o| f64::from(u8::from(o.r && o.a.is_some_and(|a| arm.matches(a))))).collect();
    Ok(cross_fit(learner, FitTarget { x: z, y: &y, w: &w, offset: None }, plan, Loss::Squared)?.predictions)
}

/// lambda_1(Z) = P(A=1 | Z, R=1), clipped.
pub fn fit_treatment_imputation(
    d: &Dataset,
    z: &DMatrix<f64>,
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
    clip_eps: f64,
) -> Result<Vec<f64>, EstimateError> {
    arm_rows_exist(d, Arm::Treated)?;
    arm_rows_exist(d, Arm::Control)?;
    let a: Vec<f64> = d.rows().iter().map(|o| f64::from(u8::from(o.a == Some(true)))).collect();
    let w = r_f64(d);
    let p = cross_fit(learner, FitTarget { x: z, y: &a, w: &w, offset: None }, plan, Loss::Bernoulli)?.predictions;
    Ok(p.into_iter().map(|v| clip(v, clip_eps)).collect())
}

fn for_arm(p1: &[f64], arm: Arm) -> Vec<f64> {
    match arm {
        Arm::Treated => p1.to_vec(),
        Arm::Control => p1.iter().map(|p| 1.0 - p).collect(),
    }
}

/// (mu_a, lambda_a) for one arm.
pub fn fit_imputation_models(
    d: &Dataset,
    arm: Arm,
    menu: &LearnerMenu,
    plan: &CrossFitPlan,
    clip_eps: f64,
) -> Result<(Vec<f64>, Vec<f64>), EstimateError> {
    let z = d.z_matrix();
    let mu = fit_outcome_imputation(d, &z, arm, &menu.continuous, plan)?;
    let l1 = fit_treatment_imputation(d, &z, &menu.binary, plan, clip_eps)?;
    Ok((mu, for_arm(&l1, arm)))
}

/// (eta_a, pi_a): regressions of lambda_a·mu_a and lambda_a on X over all
/// rows, by least squares. pi_a is clipped.
pub fn fit_marginalized_models(
    d: &Dataset,
    mu: &[f64],
    lambda: &[f64],
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
    clip_eps: f64,
) -> Result<(Vec<f64>, Vec<f64>), EstimateError> {
    let x = d.x_matrix();
    let w = vec![1.0; d.n()];
    let prod: Vec<f64> = mu.iter().zip(lambda).map(|(m, l)| m * l).collect();
    let eta = cross_fit(learner, FitTarget { x: &x, y: &prod, w: &w, offset: None }, plan, Loss::Squared)?.predictions;
    let pi = cross_fit(learner, FitTarget { x: &x, y: lambda, w: &w, offset: None }, plan, Loss::Squared)?.predictions;
    Ok((eta, pi.into_iter().map(|v| clip(v, clip_eps)).collect()))
}

/// m_a(X): regression of Y on X among validated rows in arm `a`, weighted
/// by 1/kappa.
pub fn fit_outcome_full_data(
    d: &Dataset,
    x: &DMatrix<f64>,
    kappa: &[f64],
    arm: Arm,
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
) -> Result<Vec<f64>, EstimateError> {
    arm_rows_exist(d, arm)?;
    let y: Vec<f64> = d.rows().iter().map(gold_y).collect();
    let w: Vec<f64> = d
        .rows()
        .iter()
        .zip(kappa)
        .map(|(o, k)| if o.r && o.a.is_some_and(|a| arm.matches(a)) { 1.0 / k } else { 0.0 })
        .collect();
    Ok(cross_fit(learner, FitTarget { x, y: &y, w: &w, offset: None }, plan, Loss::Squared)?.predictions)
}

/// g_1(X): logistic fit of A on X among validated rows weighted by
/// 1/kappa, clipped.
pub fn fit_propensity_full_data(
    d: &Dataset,
    x: &DMatrix<f64>,
    kappa: &[f64],
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
    clip_eps: f64,
) -> Result<Vec<f64>, EstimateError> {
    arm_rows_exist(d, Arm::Treated)?;
    arm_rows_exist(d, Arm::Control)?;
    let a: Vec<f64> = d.rows().iter().map(|o| f64::from(u8::from(o.a == Some(true)))).collect();
    let w: Vec<f64> = d.rows().iter().zip(kappa).map(|(o, k)| if o.r { 1.0 / k } else { 0.0 }).collect();
    let p = cross_fit(learner, FitTarget { x, y: &a, w: &w, offset: None }, plan, Loss::Bernoulli)?.predictions;
    Ok(p.into_iter().map(|v| clip(v, clip_eps)).collect())
}

/// (m_a, g_a) for one arm.
pub fn fit_full_data_models(
    d: &Dataset,
    kappa: &[f64],
    arm: Arm,
    menu: &LearnerMenu,
    plan: &CrossFitPlan,
    clip_eps: f64,
) -> Result<(Vec<f64>, Vec<f64>), EstimateError> {
    let x = d.x_matrix();
    let m = fit_outcome_full_data(d, &x, kappa, arm, &menu.continuous, plan)?;
    let g1 = fit_propensity_full_data(d, &x, kappa, &menu.binary, plan, clip_eps)?;
    Ok((m, for_arm(&g1, arm)))
}

/// Full-data influence value
/// `I(A=a)/g_a (Y - m_A) + m_a - center` on a validated row.
#[allow(clippy::too_many_arguments)]
pub fn compute_chi(
    obs: &Observation,
    index: usize,
    m1: f64,
    m0: f64,
    g_a: f64,
    arm: Arm,
    center: f64,
) -> Result<f64, EstimateError> {
    let (a, y) = obs.gold().ok_or(EstimateError::UnvalidatedRow(index))?;
    let m_obs = if a { m1 } else { m0 };
    let m_a = if arm.is_treated() { m1 } else { m0 };
    let resid = if arm.matches(a) { (y - m_obs) / g_a } else { 0.0 };
    Ok(resid + m_a - center)
}

/// chi for every row (NaN where r=0).
pub fn chi_vector(d: &Dataset, m1: &[f64], m0: &[f64], g_a: &[f64], arm: Arm, center: f64) -> Vec<f64> {
    d.rows()
        .iter()
        .enumerate()
        .map(|(i, o)| compute_chi(o, i, m1[i], m0[i], g_a[i], arm, center).unwrap_or(f64::NAN))
        .collect()
}

/// varphi_a(Z): regression of chi on Z among validated rows.
pub fn fit_varphi_conventional(
    d: &Dataset,
    chi: &[f64],
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
) -> Result<Vec<f64>, EstimateError> {
    let z = d.z_matrix();
    let w = r_f64(d);
    Ok(cross_fit(learner, FitTarget { x: &z, y: chi, w: &w, offset: None }, plan, Loss::Squared)?.predictions)
}

/// Transformed outcome and weight for the variance-minimising fit of
/// varphi: `((R/k)/(R/k - 1)·chi, (R/k - 1)^2)`.
pub fn eem_transform(r: bool, kappa: f64, chi: f64) -> (f64, f64) {
    if !r {
        return (0.0, 1.0);
    }
    let s = 1.0 / kappa - 1.0;
    if s.abs() < EEM_ZERO {
        (0.0, 0.0)
    } else {
        (chi / kappa / s, s * s)
    }
}

/// varphi_a fitted by empirical efficiency maximisation: weighted least
/// squares over all rows of the transformed outcome.
pub fn fit_varphi_eem(
    d: &Dataset,
    chi: &[f64],
    kappa: &[f64],
    learner: &LearnerSpec,
    plan: &CrossFitPlan,
) -> Result<Vec<f64>, EstimateError> {
    let (y, w): (Vec<f64>, Vec<f64>) =
        d.rows().iter().enumerate().map(|(i, o)| eem_transform(o.r, kappa[i], chi[i])).unzip();
    if w.iter().all(|&v| v == 0.0) {
        return Err(EstimateError::DegenerateWeights);
    }
    let z = d.z_matrix();
    Ok(cross_fit(learner, FitTarget { x: &z, y: &y, w: &w, offset: None }, plan, Loss::Squared)?.predictions)
}

/// Fits the requested nuisance groups on a shared fold assignment.
pub fn fit_nuisances(d: &Dataset, opts: &NuisanceOptions, needs: Needs) -> Result<NuisanceSet, EstimateError> {
    crate::types::validate_dataset(d)?;
    let plan = opts.plan(d)?;
    let eps = opts.clip_eps;
    let menu = &opts.menu;
    let mut set = NuisanceSet::empty(opts.kappa_mode, eps);
    set.cross_fitted = plan.is_cross_fitted();
    if needs.approach1 || needs.approach2 {
        set.kappa = Some(fit_kappa(d, opts.kappa_mode, &menu.binary, &plan, eps)?);
    }

    if needs.approach1 {
        let z = d.z_matrix();
        let l1 = fit_treatment_imputation(d, &z, &menu.binary, &plan, eps)?;
        let x = d.x_matrix();
        let w = vec![1.0; d.n()];
        let pi1 = cross_fit(&menu.continuous, FitTarget { x: &x, y: &l1, w: &w, offset: None }, &plan, Loss::Squared)?
            .predictions;
        for arm in Arm::BOTH {
            let mu = fit_outcome_imputation(d, &z, arm, &menu.continuous, &plan)?;
            let lambda = for_arm(&l1, arm);
            let prod: Vec<f64> = mu.iter().zip(&lambda).map(|(m, l)| m * l).collect();
            let eta = cross_fit(&menu.continuous, FitTarget { x: &x, y: &prod, w: &w, offset: None }, &plan, Loss::Squared)?
                .predictions;
            let pi: Vec<f64> = for_arm(&pi1, arm).into_iter().map(|v| clip(v, eps)).collect();
            let a = set.arm_mut(arm);
            a.mu = Some(mu);
            a.lambda = Some(lambda);
            a.eta = Some(eta);
            a.pi = Some(pi);
        }
    }

    if needs.approach2 {
        let kappa = set.kappa.clone().expect("fitted above");
        let x = d.x_matrix();
        let g1 = fit_propensity_full_data(d, &x, &kappa, &menu.binary, &plan, eps)?;
        let m1 = fit_outcome_full_data(d, &x, &kappa, Arm::Treated, &menu.continuous, &plan)?;
        let m0 = fit_outcome_full_data(d, &x, &kappa, Arm::Control, &menu.continuous, &plan)?;
        for arm in Arm::BOTH {
            let g = for_arm(&g1, arm);
            let m = if arm.is_treated() { &m1 } else { &m0 };
            let center = m.iter().sum::<f64>() / m.len() as f64;
            let chi = chi_vector(d, &m1, &m0, &g, arm, center);
            let a = set.arm_mut(arm);
            if needs.varphi_conventional {
                a.varphi = Some(fit_varphi_conventional(d, &chi, &menu.continuous, &plan)?);
            }
            if needs.varphi_eem {
                a.varphi_eem = Some(fit_varphi_eem(d, &chi, &kappa, &menu.continuous, &plan)?);
            }
            a.m = Some(m.clone());
            a.g = Some(g);
            a.chi = Some(chi);
        }
    }
    Ok(set)
}
