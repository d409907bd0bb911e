//! Augmented inverse-probability weighting on a single complete set of
//! (A, Y) values: the gold-standard ones (an oracle benchmark) or the
//! error-prone ones (what ignoring measurement error gives).

use super::inference::{ate_from_arms, finish, mean};
use crate::error::EstimateError;
use crate::learners::{cross_fit, make_folds, CrossFitPlan, FitTarget, Loss};
use crate::nuisance::{clip, NuisanceOptions};
use crate::types::{Arm, Dataset, Estimand, EstimateResult, MethodTag};

/// Which treatment and outcome columns the estimator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeSource {
    /// A and Y; every row must be validated.
    Gold,
    /// A* and Y*.
    Starred,
}

impl OutcomeSource {
    fn tag(self) -> MethodTag {
        match self {
            OutcomeSource::Gold => MethodTag::OracleAipw,
            OutcomeSource::Starred => MethodTag::NaiveAipw,
        }
    }
}

/// Cross-fitted AIPW estimates of E[Y(1)], E[Y(0)] and their difference.
pub fn aipw_complete(
    d: &Dataset,
    source: OutcomeSource,
    opts: &NuisanceOptions,
    level: f64,
) -> Result<Vec<EstimateResult>, EstimateError> {
    let (a, y): (Vec<bool>, Vec<f64>) = match source {
        OutcomeSource::Gold => {
            if !d.fully_validated() {
                return Err(EstimateError::GoldUnavailable);
            }
            d.rows().iter().map(|o| o.gold().expect("validated")).unzip()
        }
        OutcomeSource::Starred => d.rows().iter().map(|o| (o.a_star, o.y_star)).unzip(),
    };
    for arm in Arm::BOTH {
        if !a.iter().any(|&v| arm.matches(v)) {
            return Err(crate::error::DataError::EmptyArm { arm: u8::from(arm.is_treated()) }.into());
        }
    }
    // Folds ignore R so the gold and error-prone versions on the same
    // subjects share one assignment.
    let plan = if opts.folds <= 1 {
        CrossFitPlan::NoSplit { seed: opts.seed }
    } else {
        CrossFitPlan::Folds(make_folds(d.n(), opts.folds, opts.seed, None)?)
    };
    let x = d.x_matrix();
    let ones = vec![1.0; d.n()];
    let af: Vec<f64> = a.iter().map(|&v| f64::from(u8::from(v))).collect();
    let g1: Vec<f64> = cross_fit(&opts.menu.binary, FitTarget { x: &x, y: &af, w: &ones, offset: None }, &plan, Loss::Bernoulli)?
        .predictions
        .into_iter()
        .map(|p| clip(p, opts.clip_eps))
        .collect();

    let mut arms = Vec::with_capacity(2);
    for arm in Arm::BOTH {
        let w: Vec<f64> = a.iter().map(|&v| f64::from(u8::from(arm.matches(v)))).collect();
        let q = cross_fit(&opts.menu.continuous, FitTarget { x: &x, y: &y, w: &w, offset: None }, &plan, Loss::Squared)?
            .predictions;
        let raw: Vec<f64> = (0..d.n())
            .map(|i| {
                let g = if arm.is_treated() { g1[i] } else { 1.0 - g1[i] };
                q[i] + w[i] / g * (y[i] - q[i])
            })
            .collect();
        let point = mean(&raw);
        let ic = raw.iter().map(|v| v - point).collect();
        arms.push(finish(Estimand::for_arm(arm), source.tag(), point, ic, level)?);
    }
    let ate = ate_from_arms(&arms[0], &arms[1])?;
    arms.push(ate);
    Ok(arms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Basis, Candidate, Family, LearnerMenu, LearnerSpec};
    use crate::types::Observation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_menu() -> LearnerMenu {
        LearnerMenu {
            continuous: LearnerSpec::Single(Candidate::new(Family::Gaussian, Basis::Main)),
            binary: LearnerSpec::Single(Candidate::new(Family::Binomial, Basis::Main)),
        }
    }

    #[test]
    fn gold_requires_full_validation() {
        let d = Dataset::new(vec![
            Observation::validated(vec![0.0], true, 0.0, true, 1.0),
            Observation::unvalidated(vec![1.0], false, 0.0),
        ])
        .unwrap();
        let err = aipw_complete(&d, OutcomeSource::Gold, &NuisanceOptions::default(), 0.95).unwrap_err();
        assert_eq!(err, EstimateError::GoldUnavailable);
    }

    #[test]
    fn recovers_a_linear_effect() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = (0..4000)
            .map(|_| {
                let x: f64 = rng.random();
                let a = rng.random::<f64>() < 0.3 + 0.4 * x;
                let y = 1.0 + 2.0 * x + if a { 1.5 } else { 0.0 } + rng.random::<f64>() - 0.5;
                Observation::validated(vec![x], a, y, a, y)
            })
            .collect();
        let d = Dataset::new(rows).unwrap();
        let opts = NuisanceOptions { menu: linear_menu(), ..Default::default() };
        let r = aipw_complete(&d, OutcomeSource::Gold, &opts, 0.95).unwrap();
        assert_eq!(r[2].estimand, Estimand::Ate);
        assert!((r[2].point - 1.5).abs() < 4.0 * r[2].se, "{} {}", r[2].point, r[2].se);
        let s = aipw_complete(&d, OutcomeSource::Starred, &opts, 0.95).unwrap();
        assert_eq!(s[2].point, r[2].point);
        assert_eq!(s[2].method, MethodTag::NaiveAipw);
    }
}
