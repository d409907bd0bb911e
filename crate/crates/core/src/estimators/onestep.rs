//! Plug-in and one-step estimators for both identification strategies.

use super::inference::{finish, mean};
use crate::error::EstimateError;
use crate::nuisance::NuisanceSet;
use crate::types::{Arm, Dataset, Estimand, EstimateResult, MethodTag};

/// Mean of eta_a / pi_a.
pub fn plugin1(eta: &[f64], pi: &[f64]) -> f64 {
    let ratio: Vec<f64> = eta.iter().zip(pi).map(|(e, p)| e / p).collect();
    mean(&ratio)
}

/// Mean of m_a.
pub fn plugin2(m: &[f64]) -> f64 {
    mean(m)
}

/// Which regression supplies varphi_a in the Approach 2 one-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarphiVariant {
    Conventional,
    Eem,
}

/// Influence values of the Approach 1 one-step, centred at the plug-in.
pub fn eic_approach1(d: &Dataset, set: &NuisanceSet, arm: Arm, plugin: f64) -> Result<Vec<f64>, EstimateError> {
    let nu = set.arm(arm);
    let (mu, lambda, eta, pi) = (nu.mu()?, nu.lambda()?, nu.eta()?, nu.pi()?);
    let kappa = set.kappa()?;
    Ok(d
        .rows()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let q = eta[i] / pi[i];
            let mut v = q - plugin + lambda[i] / pi[i] * (mu[i] - q);
            if let Some((a, y)) = o.gold() {
                let w = 1.0 / (kappa[i] * pi[i]);
                if arm.matches(a) {
                    v += w * (y - q);
                }
                v -= w * lambda[i] * (mu[i] - q);
            }
            v
        })
        .collect())
}

/// Approach 1 one-step estimator.
pub fn onestep1(d: &Dataset, set: &NuisanceSet, arm: Arm, level: f64) -> Result<EstimateResult, EstimateError> {
    let nu = set.arm(arm);
    let pi1 = plugin1(nu.eta()?, nu.pi()?);
    let raw = eic_approach1(d, set, arm, pi1)?;
    one_step(Estimand::for_arm(arm), MethodTag::Os1, pi1, raw, level)
}

/// Influence values of the Approach 2 one-step, centred at `center`.
#[allow(clippy::too_many_arguments)]
pub fn eic_approach2(
    d: &Dataset,
    kappa: &[f64],
    m1: &[f64],
    m0: &[f64],
    g_a: &[f64],
    varphi: &[f64],
    arm: Arm,
    center: f64,
) -> Vec<f64> {
    let m_a = if arm.is_treated() { m1 } else { m0 };
    d.rows()
        .iter()
        .enumerate()
        .map(|(i, o)| match o.gold() {
            Some((a, y)) => {
                let s = 1.0 / kappa[i];
                let m_obs = if a { m1[i] } else { m0[i] };
                let resid = if arm.matches(a) { (y - m_obs) / g_a[i] } else { 0.0 };
                s * (resid + m_a[i] - center) - (s - 1.0) * varphi[i]
            }
            None => varphi[i],
        })
        .collect()
}

/// Approach 2 one-step estimator.
pub fn onestep2(
    d: &Dataset,
    set: &NuisanceSet,
    arm: Arm,
    variant: VarphiVariant,
    level: f64,
) -> Result<EstimateResult, EstimateError> {
    let kappa = set.kappa()?;
    let (t, c) = (set.arm(Arm::Treated), set.arm(Arm::Control));
    let nu = set.arm(arm);
    let (varphi, tag) = match variant {
        VarphiVariant::Conventional => (nu.varphi()?, MethodTag::Os2),
        VarphiVariant::Eem => (nu.varphi_eem()?, MethodTag::Os2Eem),
    };
    let pi2 = plugin2(nu.m()?);
    let raw = eic_approach2(d, kappa, t.m()?, c.m()?, nu.g()?, varphi, arm, pi2);
    one_step(Estimand::for_arm(arm), tag, pi2, raw, level)
}

/// `plugin + mean(raw)`, with influence values `raw - mean(raw)`.
fn one_step(estimand: Estimand, tag: MethodTag, plugin: f64, raw: Vec<f64>, level: f64) -> Result<EstimateResult, EstimateError> {
    let correction = mean(&raw);
    let ic: Vec<f64> = raw.iter().map(|v| v - correction).collect();
    Ok(finish(estimand, tag, plugin + correction, ic, level)?
        .with_diagnostic("plugin", plugin)
        .with_diagnostic("correction", correction))
}

/// The plug-in for `tag` (pi1 or pi2), reported with the influence values
/// of the matching one-step for its standard error.
pub fn plugin_result(onestep: &EstimateResult, tag: MethodTag) -> Result<EstimateResult, EstimateError> {
    let plugin = onestep
        .diagnostics
        .get("plugin")
        .and_then(|v| v.as_f64())
        .ok_or(EstimateError::MissingNuisance("plugin"))?;
    Ok(finish(onestep.estimand, tag, plugin, onestep.ic.clone(), onestep.ci_level)?
        .with_diagnostic("se_source", onestep.method.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{KappaMode, Observation};

    #[test]
    fn plugin_arithmetic() {
        assert_eq!(plugin1(&[3.0, 6.0], &[1.0, 2.0]), 3.0);
        assert_eq!(plugin1(&[1.0, 2.0], &[1.0, 1.0]), 1.5);
        assert_eq!(plugin1(&[0.7, 1.4], &[0.2, 0.4]), plugin1(&[1.4, 2.8], &[0.4, 0.8]));
        assert_eq!(plugin2(&[0.0, 1.0]), 0.5);
        assert_eq!(plugin2(&[2.0, 2.0]), 2.0);
        assert_eq!(plugin2(&[1.5, 3.5]) + 2.0, plugin2(&[3.5, 5.5]));
    }

    fn two_row_set() -> (Dataset, NuisanceSet) {
        let d = Dataset::new(vec![
            Observation::validated(vec![0.0], true, 0.0, true, 2.0).with_kappa(1.0),
            Observation::validated(vec![1.0], false, 0.0, false, 7.0).with_kappa(1.0),
        ])
        .unwrap();
        let mut set = NuisanceSet::empty(KappaMode::Known, 0.01);
        set.kappa = Some(vec![1.0, 1.0]);
        for arm in Arm::BOTH {
            let a = set.arm_mut(arm);
            a.m = Some(vec![1.0, 1.0]);
            a.g = Some(vec![0.5, 0.5]);
            a.varphi = Some(vec![0.0, 0.0]);
        }
        (d, set)
    }

    #[test]
    fn full_validation_arithmetic() {
        let (d, set) = two_row_set();
        let r = onestep2(&d, &set, Arm::Treated, VarphiVariant::Conventional, 0.95).unwrap();
        assert!((r.point - 2.0).abs() < 1e-15);
        assert!(r.ic.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn zero_varphi_is_weighted_complete_case() {
        let (d, mut set) = two_row_set();
        set.kappa = Some(vec![0.5, 0.25]);
        let r = onestep2(&d, &set, Arm::Treated, VarphiVariant::Conventional, 0.95).unwrap();
        // 1 + mean(2 * (2 * (2 - 1) + 1 - 1), 4 * (0 + 1 - 1))
        assert!((r.point - 3.0).abs() < 1e-15);
    }
}
