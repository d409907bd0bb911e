//! Records shared across the crate: observed two-phase data, estimator
//! output, and scenario configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::learners::LearnerMenu;
use crate::simulation::DgpParams;

/// One subject's record.
///
/// `x`, `a_star`, `y_star` and `r` are always observed. The gold-standard
/// treatment `a` and outcome `y` are present exactly when `r` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub a_star: bool,
    pub y_star: f64,
    pub r: bool,
    pub a: Option<bool>,
    pub y: Option<f64>,
    pub kappa_known: Option<f64>,
}

impl Observation {
    /// Builds an unvalidated row.
    pub fn unvalidated(x: Vec<f64>, a_star: bool, y_star: f64) -> Self {
        Self { x, a_star, y_star, r: false, a: None, y: None, kappa_known: None }
    }

    /// Builds a validated row carrying gold-standard values.
    pub fn validated(x: Vec<f64>, a_star: bool, y_star: f64, a: bool, y: f64) -> Self {
        Self { x, a_star, y_star, r: true, a: Some(a), y: Some(y), kappa_known: None }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa_known = Some(kappa);
        self
    }

    /// The always-observed record Z = (X, A*, Y*).
    pub fn z(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.x.len() + 2);
        z.extend_from_slice(&self.x);
        z.push(if self.a_star { 1.0 } else { 0.0 });
        z.push(self.y_star);
        z
    }

    /// Gold-standard (A, Y) when validated.
    pub fn gold(&self) -> Option<(bool, f64)> {
        match (self.r, self.a, self.y) {
            (true, Some(a), Some(y)) => Some((a, y)),
            _ => None,
        }
    }
}

/// A collection of observations sharing covariate dimension `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Observation>,
    p: usize,
}

impl Dataset {
    /// Builds a dataset, checking the per-row invariants. Arm coverage is
    /// checked separately by [`validate_dataset`].
    pub fn new(rows: Vec<Observation>) -> Result<Self, DataError> {
        let p = rows.first().ok_or(DataError::Empty)?.x.len();
        let d = Self { rows, p };
        d.check_rows()?;
        Ok(d)
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Observation {
        &self.rows[i]
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_validated(&self) -> usize {
        self.rows.iter().filter(|o| o.r).count()
    }

    pub fn r(&self) -> Vec<bool> {
        self.rows.iter().map(|o| o.r).collect()
    }

    /// True when every row carries a designed sampling probability.
    pub fn has_kappa(&self) -> bool {
        self.rows.iter().all(|o| o.kappa_known.is_some())
    }

    /// True when every row is validated, so gold values exist everywhere.
    pub fn fully_validated(&self) -> bool {
        self.rows.iter().all(|o| o.r)
    }

    /// Row-major covariate matrix X (n x p).
    pub fn x_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n(), self.p, |i, j| self.rows[i].x[j])
    }

    /// Always-observed matrix Z = (X, A*, Y*) (n x (p + 2)).
    pub fn z_matrix(&self) -> nalgebra::DMatrix<f64> {
        let p = self.p;
        nalgebra::DMatrix::from_fn(self.n(), p + 2, |i, j| {
            let o = &self.rows[i];
            match j {
                j if j < p => o.x[j],
                j if j == p => f64::from(u8::from(o.a_star)),
                _ => o.y_star,
            }
        })
    }

    fn check_rows(&self) -> Result<(), DataError> {
        for (i, o) in self.rows.iter().enumerate() {
            if o.x.len() != self.p {
                return Err(DataError::DimensionMismatch { row: i, expected: self.p, found: o.x.len() });
            }
            if o.x.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i, field: "x" });
            }
            if !o.y_star.is_finite() {
                return Err(DataError::NonFinite { row: i, field: "y_star" });
            }
            if o.r {
                if o.a.is_none() {
                    return Err(DataError::MissingGoldStandard { row: i, field: "a" });
                }
                match o.y {
                    None => return Err(DataError::MissingGoldStandard { row: i, field: "y" }),
                    Some(y) if !y.is_finite() => return Err(DataError::NonFinite { row: i, field: "y" }),
                    _ => {}
                }
            } else {
                if o.a.is_some() {
                    return Err(DataError::UnexpectedGoldStandard { row: i, field: "a" });
                }
                if o.y.is_some() {
                    return Err(DataError::UnexpectedGoldStandard { row: i, field: "y" });
                }
            }
            if let Some(k) = o.kappa_known {
                if !(k > 0.0 && k <= 1.0) {
                    return Err(DataError::KappaOutOfRange { row: i, value: k });
                }
            }
        }
        Ok(())
    }
}

/// Checks every structural requirement the estimators rely on: row
/// invariants, at least one validated row, and both treatment arms present
/// among validated rows.
pub fn validate_dataset(d: &Dataset) -> Result<(), DataError> {
    if d.rows.is_empty() {
        return Err(DataError::Empty);
    }
    d.check_rows()?;
    if d.n_validated() == 0 {
        return Err(DataError::NoValidatedRows);
    }
    for arm in [true, false] {
        if !d.rows.iter().any(|o| o.r && o.a == Some(arm)) {
            return Err(DataError::EmptyArm { arm: u8::from(arm) });
        }
    }
    Ok(())
}

/// Target of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    MeanY1,
    MeanY0,
    Ate,
}

impl Estimand {
    pub fn for_arm(arm: Arm) -> Self {
        match arm {
            Arm::Treated => Estimand::MeanY1,
            Arm::Control => Estimand::MeanY0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Estimand::MeanY1 => "mean_y1",
            Estimand::MeanY0 => "mean_y0",
            Estimand::Ate => "ate",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Treatment arm a in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Treated, Arm::Control];

    pub fn matches(self, a: bool) -> bool {
        a == self.is_treated()
    }

    pub fn is_treated(self) -> bool {
        matches!(self, Arm::Treated)
    }

    pub fn index(self) -> usize {
        usize::from(self.is_treated())
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Treated => Arm::Control,
            Arm::Control => Arm::Treated,
        }
    }
}

/// Estimator identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Pi1,
    Pi2,
    Os1,
    Os2,
    Os2Eem,
    Tmle2,
    Ensemble,
    NaiveAipw,
    OracleAipw,
}

impl MethodTag {
    pub const ALL: [MethodTag; 9] = [
        MethodTag::Pi1,
        MethodTag::Pi2,
        MethodTag::Os1,
        MethodTag::Os2,
        MethodTag::Os2Eem,
        MethodTag::Tmle2,
        MethodTag::Ensemble,
        MethodTag::NaiveAipw,
        MethodTag::OracleAipw,
    ];

    /// Methods run in every simulation replication.
    pub const SIMULATION_ROSTER: [MethodTag; 8] = [
        MethodTag::NaiveAipw,
        MethodTag::OracleAipw,
        MethodTag::Pi1,
        MethodTag::Os1,
        MethodTag::Os2,
        MethodTag::Os2Eem,
        MethodTag::Tmle2,
        MethodTag::Ensemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Pi1 => "pi1",
            MethodTag::Pi2 => "pi2",
            MethodTag::Os1 => "os1",
            MethodTag::Os2 => "os2",
            MethodTag::Os2Eem => "os2_eem",
            MethodTag::Tmle2 => "tmle2",
            MethodTag::Ensemble => "ensemble",
            MethodTag::NaiveAipw => "naive_aipw",
            MethodTag::OracleAipw => "oracle_aipw",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// Point estimate with influence-curve based inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimand: Estimand,
    pub method: MethodTag,
    pub point: f64,
    /// Estimated influence values, one per row, centred at zero.
    pub ic: Vec<f64>,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    #[serde(default)]
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
}

impl EstimateResult {
    pub fn n(&self) -> usize {
        self.ic.len()
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }

    pub fn with_diagnostic(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.diagnostics.insert(key.to_string(), value.into());
        self
    }

    /// The JSON object written by the estimate command.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method.as_str(),
            "estimand": self.estimand.as_str(),
            "point": self.point,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n(),
            "diagnostics": self.diagnostics,
        })
    }
}

/// How the phase-two sampling probabilities are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    /// Use the designed probabilities as given.
    Known,
    /// Logistic refit of R on Z with the designed log-odds as offset.
    KnownRefit,
    /// Flexible fit of R on Z.
    Estimated,
}

impl KappaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            KappaMode::Known => "known",
            KappaMode::KnownRefit => "known_refit",
            KappaMode::Estimated => "estimated",
        }
    }
}

impl fmt::Display for KappaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KappaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "known" => Ok(KappaMode::Known),
            "known_refit" | "known-refit" => Ok(KappaMode::KnownRefit),
            "estimated" => Ok(KappaMode::Estimated),
            other => Err(format!("unknown kappa mode {other:?} (expected known, known_refit, estimated)")),
        }
    }
}

/// One Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n: usize,
    pub rho: f64,
    pub reps: usize,
    pub master_seed: u64,
    /// Cross-fitting folds K; 1 disables sample splitting.
    pub folds: usize,
    pub clip_eps: f64,
    /// Ensemble regulariser.
    pub delta: f64,
    pub kappa_mode: KappaMode,
    pub ci_level: f64,
    pub learner_menu: LearnerMenu,
    pub dgp: DgpParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            rho: 0.3,
            reps: 100,
            master_seed: 1,
            folds: 5,
            clip_eps: 0.01,
            delta: 0.01,
            kappa_mode: KappaMode::Known,
            ci_level: 0.95,
            learner_menu: LearnerMenu::default(),
            dgp: DgpParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Checks the scalar invariants, returning a message suitable for users.
    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err("rho must lie in (0,1)".into());
        }
        if self.reps == 0 {
            return Err("reps must be positive".into());
        }
        if self.folds == 0 {
            return Err("folds must be positive".into());
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return Err("clip_eps must lie in (0,0.5)".into());
        }
        if !(self.delta > 0.0) {
            return Err("delta must be positive".into());
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err("ci_level must lie in (0,1)".into());
        }
        self.dgp.validate()?;
        self.learner_menu.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}
