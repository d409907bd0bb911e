//! Runs a list of estimators on one dataset, sharing nuisance fits.

use super::aipw::{aipw_complete, OutcomeSource};
use super::ensemble::ensemble;
use super::inference::ate_from_arms;
use super::onestep::{onestep1, onestep2, plugin_result, VarphiVariant};
use super::tmle::tmle2;
use crate::error::EstimateError;
use crate::nuisance::{fit_nuisances, Needs, NuisanceOptions, NuisanceSet};
use crate::types::{Arm, Dataset, EstimateResult, MethodTag, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub nuisance: NuisanceOptions,
    /// Ensemble regulariser.
    pub delta: f64,
    pub ci_level: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { nuisance: NuisanceOptions::default(), delta: 0.01, ci_level: 0.95 }
    }
}

impl EstimateOptions {
    pub fn from_config(c: &ScenarioConfig, seed: u64) -> Self {
        Self { nuisance: NuisanceOptions::from_config(c, seed), delta: c.delta, ci_level: c.ci_level }
    }
}

/// Results for E[Y(1)], E[Y(0)] and the ATE, in that order.
pub type ArmResults = Vec<EstimateResult>;

type Slot = Option<Result<ArmResults, EstimateError>>;

struct Runner<'a> {
    d: &'a Dataset,
    opts: &'a EstimateOptions,
    /// EEM weights vanish under full validation, so varphi_eem is only
    /// fitted when a method reads it.
    want_eem: bool,
    set1: Option<Result<NuisanceSet, EstimateError>>,
    set2: Option<Result<NuisanceSet, EstimateError>>,
    os1: Slot,
    os2: Slot,
    os2_eem: Slot,
}

fn per_arm(f: impl Fn(Arm) -> Result<EstimateResult, EstimateError>) -> Result<ArmResults, EstimateError> {
    let t = f(Arm::Treated)?;
    let c = f(Arm::Control)?;
    let ate = ate_from_arms(&t, &c)?;
    Ok(vec![t, c, ate])
}

fn plugins(os: &ArmResults, tag: MethodTag) -> Result<ArmResults, EstimateError> {
    let t = plugin_result(&os[0], tag)?;
    let c = plugin_result(&os[1], tag)?;
    let ate = ate_from_arms(&t, &c)?.with_diagnostic("se_source", os[0].method.as_str());
    Ok(vec![t, c, ate])
}

impl<'a> Runner<'a> {
    fn approach1(&mut self) -> Result<&NuisanceSet, EstimateError> {
        let needs = Needs { approach1: true, approach2: false, varphi_conventional: false, varphi_eem: false };
        let (d, o) = (self.d, &self.opts.nuisance);
        self.set1.get_or_insert_with(|| fit_nuisances(d, o, needs)).as_ref().map_err(Clone::clone)
    }

    fn approach2(&mut self) -> Result<&NuisanceSet, EstimateError> {
        let needs = Needs { approach1: false, approach2: true, varphi_conventional: true, varphi_eem: self.want_eem };
        let (d, o) = (self.d, &self.opts.nuisance);
        self.set2.get_or_insert_with(|| fit_nuisances(d, o, needs)).as_ref().map_err(Clone::clone)
    }

    fn os1(&mut self) -> Result<ArmResults, EstimateError> {
        if self.os1.is_none() {
            let (d, level) = (self.d, self.opts.ci_level);
            let r = self.approach1().and_then(|s| per_arm(|a| onestep1(d, s, a, level)));
            self.os1 = Some(r);
        }
        self.os1.clone().expect("filled above")
    }

    fn os2(&mut self, variant: VarphiVariant) -> Result<ArmResults, EstimateError> {
        let filled = match variant {
            VarphiVariant::Conventional => self.os2.is_some(),
            VarphiVariant::Eem => self.os2_eem.is_some(),
        };
        if !filled {
            let (d, level) = (self.d, self.opts.ci_level);
            let r = self.approach2().and_then(|s| per_arm(|a| onestep2(d, s, a, variant, level)));
            match variant {
                VarphiVariant::Conventional => self.os2 = Some(r),
                VarphiVariant::Eem => self.os2_eem = Some(r),
            }
        }
        match variant {
            VarphiVariant::Conventional => self.os2.clone(),
            VarphiVariant::Eem => self.os2_eem.clone(),
        }
        .expect("filled above")
    }

    fn run(&mut self, method: MethodTag, oracle: Option<&Dataset>) -> Result<ArmResults, EstimateError> {
        let level = self.opts.ci_level;
        match method {
            MethodTag::Os1 => self.os1(),
            MethodTag::Pi1 => plugins(&self.os1()?, MethodTag::Pi1),
            MethodTag::Os2 => self.os2(VarphiVariant::Conventional),
            MethodTag::Os2Eem => self.os2(VarphiVariant::Eem),
            MethodTag::Pi2 => plugins(&self.os2(VarphiVariant::Conventional)?, MethodTag::Pi2),
            MethodTag::Tmle2 => {
                let d = self.d;
                let s = self.approach2()?;
                per_arm(|a| tmle2(d, s, a, level))
            }
            MethodTag::Ensemble => {
                let (a, b) = (self.os1()?, self.os2(VarphiVariant::Eem)?);
                // The ATE combination gets its own weight rather than being
                // the difference of the per-arm combinations.
                (0..3).map(|i| ensemble(&a[i], &b[i], self.opts.delta)).collect()
            }
            MethodTag::NaiveAipw => aipw_complete(self.d, OutcomeSource::Starred, &self.opts.nuisance, level),
            MethodTag::OracleAipw => {
                aipw_complete(oracle.unwrap_or(self.d), OutcomeSource::Gold, &self.opts.nuisance, level)
            }
        }
    }
}

/// Runs each method in `methods` on `d`. The oracle AIPW uses `oracle`
/// when given (the same subjects with gold values everywhere), otherwise
/// `d` itself. Each method yields its three results or its own error; one
/// failing method does not stop the others.
pub fn estimate_methods(
    d: &Dataset,
    oracle: Option<&Dataset>,
    methods: &[MethodTag],
    opts: &EstimateOptions,
) -> Vec<(MethodTag, Result<ArmResults, EstimateError>)> {
    let want_eem = methods.iter().any(|m| matches!(m, MethodTag::Os2Eem | MethodTag::Ensemble));
    let mut runner = Runner { d, opts, want_eem, set1: None, set2: None, os1: None, os2: None, os2_eem: None };
    methods.iter().map(|&m| (m, runner.run(m, oracle))).collect()
}
