//! A discrete population realised exactly by row counts, with its
//! nuisance functions computed by enumeration.

#![allow(dead_code)]

use twophase::nuisance::NuisanceOptions;
use twophase::{Arm, Dataset, LearnerMenu, Observation};

/// Binary X1, X2, A*, Y* with Y in {0, 1, 2}. Every probability is a
/// multiple of 1/5, so `BASE` rows per X cell realise the distribution
/// exactly, validation included.
pub struct Saturated;

const XS: [[u8; 2]; 4] = [[0, 0], [0, 1], [1, 0], [1, 1]];

impl Saturated {
    pub const BASE: usize = 3125;

    fn p_a1(x: [u8; 2]) -> f64 {
        [0.4, 0.6, 0.2, 0.8][usize::from(x[0]) * 2 + usize::from(x[1])]
    }

    fn p_y(y: u8, a: bool, x: [u8; 2]) -> f64 {
        let table = match (a, x[0] + x[1]) {
            (false, 0) => [0.4, 0.4, 0.2],
            (false, 1) => [0.2, 0.6, 0.2],
            (false, _) => [0.2, 0.4, 0.4],
            (true, 0) => [0.2, 0.4, 0.4],
            (true, 1) => [0.2, 0.2, 0.6],
            (true, _) => [0.6, 0.2, 0.2],
        };
        table[usize::from(y)]
    }

    fn p_astar(a_star: bool, a: bool) -> f64 {
        if a_star == a {
            0.8
        } else {
            0.2
        }
    }

    fn p_ystar1(y: u8) -> f64 {
        [0.2, 0.4, 0.8][usize::from(y)]
    }

    pub fn kappa(a_star: bool, y_star: u8) -> f64 {
        (2.0 + f64::from(u8::from(a_star)) + f64::from(y_star)) / 5.0
    }

    /// (a, a*, y, y*, probability given x).
    fn cells(x: [u8; 2]) -> Vec<(bool, bool, u8, u8, f64)> {
        let mut out = Vec::new();
        for a in [false, true] {
            let pa = if a { Self::p_a1(x) } else { 1.0 - Self::p_a1(x) };
            for a_star in [false, true] {
                for y in 0..3u8 {
                    for y_star in 0..2u8 {
                        let ps = if y_star == 1 { Self::p_ystar1(y) } else { 1.0 - Self::p_ystar1(y) };
                        out.push((a, a_star, y, y_star, pa * Self::p_astar(a_star, a) * Self::p_y(y, a, x) * ps));
                    }
                }
            }
        }
        out
    }

    fn rows(all_validated: bool) -> Dataset {
        let mut rows = Vec::new();
        for x in XS {
            let xs = vec![f64::from(x[0]), f64::from(x[1])];
            for (a, a_star, y, y_star, p) in Self::cells(x) {
                let k = if all_validated { 1.0 } else { Self::kappa(a_star, y_star) };
                let count = (p * Self::BASE as f64).round() as usize;
                let validated = (k * count as f64).round() as usize;
                for j in 0..count {
                    let o = if j < validated {
                        Observation::validated(xs.clone(), a_star, f64::from(y_star), a, f64::from(y))
                    } else {
                        Observation::unvalidated(xs.clone(), a_star, f64::from(y_star))
                    };
                    rows.push(o.with_kappa(k));
                }
            }
        }
        Dataset::new(rows).expect("valid rows")
    }

    /// Two-phase sample with validation probability depending on (A*, Y*).
    pub fn dataset() -> Dataset {
        Self::rows(false)
    }

    /// The same population with every row validated.
    pub fn complete() -> Dataset {
        Self::rows(true)
    }

    /// No sample splitting and saturated learners, so every fit reproduces
    /// cell means exactly.
    pub fn options() -> NuisanceOptions {
        let menu = LearnerMenu { continuous: "lin_sat".parse().unwrap(), binary: "logit_sat".parse().unwrap() };
        NuisanceOptions { folds: 1, menu, ..Default::default() }
    }

    /// lambda_a(z), mu_a(z).
    pub fn lambda_mu(x: [u8; 2], a_star: bool, y_star: u8, arm: Arm) -> (f64, f64) {
        let cells: Vec<_> = Self::cells(x).into_iter().filter(|c| c.1 == a_star && c.3 == y_star).collect();
        let pz: f64 = cells.iter().map(|c| c.4).sum();
        let pza: f64 = cells.iter().filter(|c| arm.matches(c.0)).map(|c| c.4).sum();
        let ey: f64 = cells.iter().filter(|c| arm.matches(c.0)).map(|c| c.4 * f64::from(c.2)).sum();
        (pza / pz, ey / pza)
    }

    /// eta_a(x), pi_a(x).
    pub fn eta_pi(x: [u8; 2], arm: Arm) -> (f64, f64) {
        let mut eta = 0.0;
        let mut pi = 0.0;
        for a_star in [false, true] {
            for y_star in 0..2u8 {
                let pz: f64 = Self::cells(x).iter().filter(|c| c.1 == a_star && c.3 == y_star).map(|c| c.4).sum();
                let (l, m) = Self::lambda_mu(x, a_star, y_star, arm);
                eta += pz * l * m;
                pi += pz * l;
            }
        }
        (eta, pi)
    }

    /// E[Y(a)]: X cells are equally likely.
    pub fn psi(arm: Arm) -> f64 {
        XS.iter()
            .map(|&x| {
                let (e, p) = Self::eta_pi(x, arm);
                e / p
            })
            .sum::<f64>()
            / 4.0
    }

    /// lambda mu / pi - lambda eta / pi^2 + eta / pi - psi.
    pub fn composite(x: [u8; 2], a_star: bool, y_star: u8, arm: Arm) -> f64 {
        let (l, m) = Self::lambda_mu(x, a_star, y_star, arm);
        let (e, p) = Self::eta_pi(x, arm);
        l * m / p - l * e / (p * p) + e / p - Self::psi(arm)
    }
}
