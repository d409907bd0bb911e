use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::learners::expit;
use crate::types::{Dataset, Observation};

/// Clamp applied to the designed phase-two sampling probabilities.
pub const SAMPLING_CLAMP: (f64, f64) = (0.001, 0.999);

/// Parameters of the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpParams {
    /// Propensity coefficients on X.
    pub delta_ps: [f64; 3],
    pub beta: [f64; 3],
    pub tau: f64,
    /// Effect modification by X in the treated arm.
    pub gamma: [f64; 3],
    /// Systematic outcome measurement error X·nu.
    pub nu: [f64; 3],
    /// Sampling coefficients over Z = (X, A*, Y*).
    pub theta: [f64; 5],
    /// Probability that A* differs from A.
    pub misclass: f64,
    /// Standard deviation of the random outcome measurement error.
    pub ystar_noise_sd: f64,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            delta_ps: [-0.1, -0.6, -0.9],
            beta: [1.0, 2.0, -2.0],
            tau: 1.0,
            gamma: [1.0, 1.0, 1.0],
            nu: [0.1, -0.1, 0.1],
            theta: [0.6, -0.2, 0.8, 0.1, -0.3],
            misclass: 0.2,
            ystar_noise_sd: 1.0,
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..0.5).contains(&self.misclass) {
            return Err("misclass must lie in [0,0.5)".into());
        }
        if !(self.ystar_noise_sd >= 0.0) {
            return Err("ystar_noise_sd must be non-negative".into());
        }
        let all = self.delta_ps.iter().chain(&self.beta).chain(&self.gamma).chain(&self.nu).chain(&self.theta);
        if !all.chain([&self.tau]).all(|v| v.is_finite()) {
            return Err("dgp coefficients must be finite".into());
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A subject with every variable observed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteRow {
    pub x: [f64; 3],
    pub a: bool,
    pub a_star: bool,
    pub y: f64,
    pub y_star: f64,
}

impl CompleteRow {
    pub fn z(&self) -> [f64; 5] {
        [self.x[0], self.x[1], self.x[2], f64::from(u8::from(self.a_star)), self.y_star]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompleteData {
    pub rows: Vec<CompleteRow>,
}

impl CompleteData {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Every row validated with κ = 1: the data an oracle would see.
    pub fn fully_observed(&self) -> Dataset {
        let rows = self
            .rows
            .iter()
            .map(|c| Observation::validated(c.x.to_vec(), c.a_star, c.y_star, c.a, c.y).with_kappa(1.0))
            .collect();
        Dataset::new(rows).expect("complete rows are valid")
    }
}

/// Draws one row given its covariates.
pub fn draw_given_x<R: Rng + ?Sized>(p: &DgpParams, x: [f64; 3], rng: &mut R) -> CompleteRow {
    let a = rng.random::<f64>() < expit(dot(&x, &p.delta_ps));
    let flip = rng.random::<f64>() < p.misclass;
    let sd = (x[0] + x[1] + x[2]).sqrt();
    let eps = if sd > 0.0 { Normal::new(0.0, sd).expect("finite sd").sample(rng) } else { 0.0 };
    let af = f64::from(u8::from(a));
    let y = dot(&x, &p.beta) + p.tau * af + af * dot(&x, &p.gamma) + eps;
    let v: f64 = rng.sample(rand_distr::StandardNormal);
    let y_star = y + dot(&x, &p.nu) + p.ystar_noise_sd * v;
    CompleteRow { x, a, a_star: a != flip, y, y_star }
}

/// Simulates `n` complete rows: X uniform on the unit cube, logistic
/// treatment, heteroskedastic outcome with error variance x1+x2+x3, and
/// error-prone copies A* and Y*.
pub fn generate_complete<R: Rng + ?Sized>(p: &DgpParams, n: usize, rng: &mut R) -> CompleteData {
    let u = Uniform::new(0.0, 1.0).expect("valid range");
    let rows = (0..n)
        .map(|_| {
            let x = [u.sample(rng), u.sample(rng), u.sample(rng)];
            draw_given_x(p, x, rng)
        })
        .collect();
    CompleteData { rows }
}

/// Designed sampling probabilities rho·expit(zθ)/mean(expit(zθ)), clamped.
pub fn sampling_probabilities(complete: &CompleteData, rho: f64, theta: &[f64; 5]) -> Vec<f64> {
    let raw: Vec<f64> = complete.rows.iter().map(|c| expit(dot(&c.z(), theta))).collect();
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    raw.iter().map(|v| (rho * v / mean).clamp(SAMPLING_CLAMP.0, SAMPLING_CLAMP.1)).collect()
}

/// Draws the phase-two indicator and masks gold-standard values on
/// unsampled rows. The designed probabilities are kept as `kappa_known`.
pub fn apply_two_phase<R: Rng + ?Sized>(complete: &CompleteData, rho: f64, theta: &[f64; 5], rng: &mut R) -> Dataset {
    let probs = sampling_probabilities(complete, rho, theta);
    let rows = complete
        .rows
        .iter()
        .zip(probs)
        .map(|(c, p)| {
            let r = Bernoulli::new(p).expect("clamped probability").sample(rng);
            let obs = if r {
                Observation::validated(c.x.to_vec(), c.a_star, c.y_star, c.a, c.y)
            } else {
                Observation::unvalidated(c.x.to_vec(), c.a_star, c.y_star)
            };
            obs.with_kappa(p)
        })
        .collect();
    Dataset::new(rows).expect("simulated rows are valid")
}

/// E[Y(1) − Y(0)] = τ + γ·E[X] with E[X] = (1/2, 1/2, 1/2).
pub fn true_ate(p: &DgpParams) -> f64 {
    p.tau + 0.5 * p.gamma.iter().sum::<f64>()
}

/// E[Y(a)] for each arm.
pub fn true_means(p: &DgpParams) -> (f64, f64) {
    let base = 0.5 * p.beta.iter().sum::<f64>();
    (base + true_ate(p), base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_truth_is_two_and_a_half() {
        assert_eq!(true_ate(&DgpParams::default()), 2.5);
        let p = DgpParams { gamma: [0.0; 3], tau: 1.0, ..Default::default() };
        assert_eq!(true_ate(&p), 1.0);
        let p = DgpParams { gamma: [2.0, 0.0, 0.0], tau: 0.0, ..Default::default() };
        assert_eq!(true_ate(&p), 1.0);
    }

    #[test]
    fn origin_has_no_outcome_noise() {
        let p = DgpParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut treated = 0;
        for _ in 0..2000 {
            let row = draw_given_x(&p, [0.0; 3], &mut rng);
            assert_eq!(row.y, if row.a { p.tau } else { 0.0 });
            treated += usize::from(row.a);
        }
        assert!((treated as f64 / 2000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn no_misclassification_keeps_treatment() {
        let p = DgpParams { misclass: 0.0, ..Default::default() };
        let d = generate_complete(&p, 500, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(d.rows.iter().all(|r| r.a == r.a_star));
    }

    #[test]
    fn flat_theta_gives_constant_probabilities() {
        let d = generate_complete(&DgpParams::default(), 50, &mut ChaCha8Rng::seed_from_u64(2));
        for p in sampling_probabilities(&d, 0.3, &[0.0; 5]) {
            assert!((p - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn masking_hides_gold_values() {
        let d = generate_complete(&DgpParams::default(), 300, &mut ChaCha8Rng::seed_from_u64(3));
        let obs = apply_two_phase(&d, 0.3, &DgpParams::default().theta, &mut ChaCha8Rng::seed_from_u64(5));
        for o in obs.rows() {
            assert_eq!(o.a.is_some(), o.r);
            assert_eq!(o.y.is_some(), o.r);
            assert!(o.kappa_known.is_some());
        }
    }
}
