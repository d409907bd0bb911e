//! Doubly-robust estimation of counterfactual means and the average
//! treatment effect when treatment and outcome are measured with error and
//! their gold-standard values are known only on a two-phase validation
//! subsample.
//!
//! The crate contains the regression stack ([`learners`]), nuisance
//! estimation with cross-fitting ([`nuisance`]), the estimators themselves
//! ([`estimators`]) and a Monte Carlo harness ([`simulation`]).

pub mod error;
pub mod estimators;
pub mod io;
pub mod learners;
pub mod nuisance;
pub mod simulation;
pub mod types;

pub use error::{DataError, EstimateError, LearnError};
pub use learners::{LearnerMenu, LearnerSpec, Predictor};
pub use types::{
    validate_dataset, Arm, Dataset, EstimateResult, Estimand, KappaMode, MethodTag, Observation, ScenarioConfig,
};
