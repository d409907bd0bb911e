use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::{expand_matrix, Basis};
use super::linalg::Scaling;
use crate::error::LearnError;

pub(crate) fn expit(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Response family of a single learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Weighted least squares.
    Gaussian,
    /// Weighted logistic regression fitted by IRLS.
    Binomial,
}

/// One base learner: a family plus a feature expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub family: Family,
    pub basis: Basis,
}

impl Candidate {
    pub const fn new(family: Family, basis: Basis) -> Self {
        Self { family, basis }
    }

    pub fn name(&self) -> &'static str {
        match (self.family, self.basis) {
            (Family::Gaussian, Basis::Main) => "lin",
            (Family::Gaussian, Basis::Interactions) => "lin_int",
            (Family::Gaussian, Basis::Poly3) => "lin_poly3",
            (Family::Gaussian, Basis::Saturated) => "lin_sat",
            (Family::Binomial, Basis::Main) => "logit",
            (Family::Binomial, Basis::Interactions) => "logit_int",
            (Family::Binomial, Basis::Poly3) => "logit_poly3",
            (Family::Binomial, Basis::Saturated) => "logit_sat",
        }
    }
}

impl FromStr for Candidate {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (family, rest) = if let Some(rest) = s.strip_prefix("logit") {
            (Family::Binomial, rest)
        } else if let Some(rest) = s.strip_prefix("lin") {
            (Family::Gaussian, rest)
        } else {
            return Err(LearnError::UnknownSpec(s.to_string()));
        };
        let basis = match rest {
            "" => Basis::Main,
            "_int" => Basis::Interactions,
            "_poly3" => Basis::Poly3,
            "_sat" => Basis::Saturated,
            _ => return Err(LearnError::UnknownSpec(s.to_string())),
        };
        Ok(Candidate { family, basis })
    }
}

/// A configured learner: one candidate, or a cross-validated stack of them.
///
/// Textual form: `lin`, `lin_int`, `lin_poly3`, `logit`, `logit_int`,
/// `logit_poly3` (plus the `_sat` saturated variants), or
/// `sl:<comma-separated candidates>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LearnerSpec {
    Single(Candidate),
    Stack(Vec<Candidate>),
}

impl LearnerSpec {
    pub fn candidates(&self) -> Vec<Candidate> {
        match self {
            LearnerSpec::Single(c) => vec![*c],
            LearnerSpec::Stack(cs) => cs.clone(),
        }
    }

    pub fn is_stack(&self) -> bool {
        matches!(self, LearnerSpec::Stack(_))
    }

    /// Default menu for continuous targets: main effects, pairwise
    /// interactions, and per-coordinate cubic polynomials.
    pub fn default_continuous() -> Self {
        LearnerSpec::Stack(vec![
            Candidate::new(Family::Gaussian, Basis::Main),
            Candidate::new(Family::Gaussian, Basis::Interactions),
            Candidate::new(Family::Gaussian, Basis::Poly3),
        ])
    }

    /// Default menu for binary targets.
    pub fn default_binary() -> Self {
        LearnerSpec::Stack(vec![
            Candidate::new(Family::Binomial, Basis::Main),
            Candidate::new(Family::Binomial, Basis::Interactions),
            Candidate::new(Family::Binomial, Basis::Poly3),
        ])
    }
}

impl FromStr for LearnerSpec {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(list) = s.strip_prefix("sl:") {
            let cands = list
                .split(',')
                .map(|c| c.trim().parse::<Candidate>())
                .collect::<Result<Vec<_>, _>>()?;
            if cands.is_empty() {
                return Err(LearnError::UnknownSpec(s.to_string()));
            }
            Ok(LearnerSpec::Stack(cands))
        } else {
            Ok(LearnerSpec::Single(s.parse()?))
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Single(c) => f.write_str(c.name()),
            LearnerSpec::Stack(cs) => {
                let names: Vec<&str> = cs.iter().map(|c| c.name()).collect();
                write!(f, "sl:{}", names.join(","))
            }
        }
    }
}

impl TryFrom<String> for LearnerSpec {
    type Error = LearnError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LearnerSpec> for String {
    fn from(s: LearnerSpec) -> String {
        s.to_string()
    }
}

/// Learners used for continuous-valued and binary nuisance targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerMenu {
    pub continuous: LearnerSpec,
    pub binary: LearnerSpec,
}

impl Default for LearnerMenu {
    fn default() -> Self {
        Self { continuous: LearnerSpec::default_continuous(), binary: LearnerSpec::default_binary() }
    }
}

impl LearnerMenu {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.continuous.candidates().iter().any(|c| c.family != Family::Gaussian) {
            return Err(LearnError::UnknownSpec(format!("{} (continuous targets need lin* learners)", self.continuous)));
        }
        if self.binary.candidates().iter().any(|c| c.family != Family::Binomial) {
            return Err(LearnError::UnknownSpec(format!("{} (binary targets need logit* learners)", self.binary)));
        }
        Ok(())
    }
}

/// A fitted generalized linear model on an expanded, standardised design.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub basis: Basis,
    pub(crate) scaling: Scaling,
    pub(crate) beta: Vec<f64>,
    pub(crate) intercept: bool,
    /// Rank-deficient normal equations were solved with the ridge fallback.
    pub ridged: bool,
    /// Separation was detected and the L2-penalised refit is in use.
    pub penalized: bool,
    pub iterations: usize,
}

impl GlmFit {
    /// Linear predictor on raw features (offset excluded).
    pub fn linear_predictor(&self, raw: &DMatrix<f64>) -> Vec<f64> {
        self.linear_predictor_expanded(&expand_matrix(raw, self.basis))
    }

    /// Linear predictor on features that are already basis-expanded.
    pub(crate) fn linear_predictor_expanded(&self, e: &DMatrix<f64>) -> Vec<f64> {
        let d = self.scaling.design(e, self.intercept);
        let eta = &d * DVector::from_column_slice(&self.beta);
        eta.iter().copied().collect()
    }

    /// Coefficients on the raw expanded features, intercept first (zero
    /// when the model has no intercept).
    pub fn coefficients(&self) -> Vec<f64> {
        self.scaling.unscale(&self.beta, self.intercept)
    }
}

/// Convex combination of fitted component predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    pub names: Vec<String>,
    pub components: Vec<Predictor>,
    /// Simplex weights aligned with `components`.
    pub weights: Vec<f64>,
    /// Candidates that failed to fit and were excluded.
    pub dropped: Vec<String>,
    pub cv_loss: f64,
}

/// A fitted regression mapping raw features to a value or probability.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Linear(GlmFit),
    Logistic(GlmFit),
    Stacked(StackedModel),
}

impl Predictor {
    pub fn predict(&self, raw: &DMatrix<f64>) -> Vec<f64> {
        match self {
            Predictor::Linear(m) => m.linear_predictor(raw),
            Predictor::Logistic(m) => m.linear_predictor(raw).into_iter().map(expit).collect(),
            Predictor::Stacked(s) => {
                let mut out = vec![0.0; raw.nrows()];
                for (c, &w) in s.components.iter().zip(&s.weights) {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, p) in out.iter_mut().zip(c.predict(raw)) {
                        *o += w * p;
                    }
                }
                out
            }
        }
    }

    /// Predictions for a logistic model whose linear predictor carries an
    /// offset. For other kinds the offset is ignored.
    pub fn predict_with_offset(&self, raw: &DMatrix<f64>, offset: &[f64]) -> Vec<f64> {
        match self {
            Predictor::Logistic(m) => {
                m.linear_predictor(raw).into_iter().zip(offset).map(|(e, o)| expit(e + o)).collect()
            }
            _ => self.predict(raw),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict(&DMatrix::from_row_slice(1, x.len(), x))[0]
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Predictor::Linear(_) => "linear",
            Predictor::Logistic(_) => "logistic",
            Predictor::Stacked(_) => "stacked",
        }
    }

    pub fn glm(&self) -> Option<&GlmFit> {
        match self {
            Predictor::Linear(m) | Predictor::Logistic(m) => Some(m),
            Predictor::Stacked(_) => None,
        }
    }

    pub fn stacked(&self) -> Option<&StackedModel> {
        match self {
            Predictor::Stacked(s) => Some(s),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_strings_parse_and_print() {
        for s in ["lin", "lin_int", "lin_poly3", "logit", "logit_int", "logit_poly3", "sl:lin,lin_int,lin_poly3"] {
            let spec: LearnerSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("glm".parse::<LearnerSpec>().is_err());
        assert!("sl:lin,bogus".parse::<LearnerSpec>().is_err());
    }

    #[test]
    fn menu_rejects_wrong_family() {
        let menu = LearnerMenu { continuous: "logit".parse().unwrap(), binary: LearnerSpec::default_binary() };
        assert!(menu.validate().is_err());
        assert!(LearnerMenu::default().validate().is_ok());
    }

    #[test]
    fn expit_is_stable() {
        assert_eq!(expit(0.0), 0.5);
        assert!(expit(800.0) <= 1.0 && expit(-800.0) >= 0.0);
        assert!((logit(expit(2.5)) - 2.5).abs() < 1e-12);
    }
}
