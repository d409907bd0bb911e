//! Estimators on a discrete population realised exactly, against values
//! computed by enumeration.

#[path = "common/saturated.rs"]
mod saturated;

use saturated::Saturated;
use twophase::estimators::{aipw_complete, onestep1, onestep2, plugin1, plugin2, OutcomeSource, VarphiVariant};
use twophase::nuisance::{fit_nuisances, Needs};
use twophase::Arm;

#[test]
fn one_steps_recover_the_enumerated_means() {
    let d = Saturated::dataset();
    let set = fit_nuisances(&d, &Saturated::options(), Needs::ALL).unwrap();
    for arm in Arm::BOTH {
        let psi = Saturated::psi(arm);
        let nu = set.arm(arm);
        assert!((plugin1(nu.eta().unwrap(), nu.pi().unwrap()) - psi).abs() < 1e-6);
        assert!((plugin2(nu.m().unwrap()) - psi).abs() < 1e-6);
        let os1 = onestep1(&d, &set, arm, 0.95).unwrap();
        assert!((os1.point - psi).abs() < 1e-6, "{arm:?}: os1 {} vs {psi}", os1.point);
        for variant in [VarphiVariant::Conventional, VarphiVariant::Eem] {
            let os2 = onestep2(&d, &set, arm, variant, 0.95).unwrap();
            assert!((os2.point - psi).abs() < 1e-6, "{arm:?} {variant:?}: os2 {} vs {psi}", os2.point);
        }
    }
}

#[test]
fn imputations_match_enumeration() {
    let d = Saturated::dataset();
    let set = fit_nuisances(&d, &Saturated::options(), Needs::ALL).unwrap();
    for arm in Arm::BOTH {
        let nu = set.arm(arm);
        let (mu, lambda, eta, pi) = (nu.mu().unwrap(), nu.lambda().unwrap(), nu.eta().unwrap(), nu.pi().unwrap());
        for (i, o) in d.rows().iter().enumerate().step_by(97) {
            let x = [o.x[0] as u8, o.x[1] as u8];
            let (l, m) = Saturated::lambda_mu(x, o.a_star, o.y_star as u8, arm);
            let (e, p) = Saturated::eta_pi(x, arm);
            assert!((lambda[i] - l).abs() < 1e-6 && (mu[i] - m).abs() < 1e-6);
            assert!((eta[i] - e).abs() < 1e-6 && (pi[i] - p).abs() < 1e-6);
        }
    }
}

#[test]
fn complete_data_aipw_recovers_the_enumerated_means() {
    let d = Saturated::complete();
    let res = aipw_complete(&d, OutcomeSource::Gold, &Saturated::options(), 0.95).unwrap();
    let (t, c) = (Saturated::psi(Arm::Treated), Saturated::psi(Arm::Control));
    assert!((res[0].point - t).abs() < 1e-6, "{} vs {t}", res[0].point);
    assert!((res[1].point - c).abs() < 1e-6, "{} vs {c}", res[1].point);
    assert!((res[2].point - (t - c)).abs() < 1e-6);
}
