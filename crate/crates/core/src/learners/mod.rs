//! Regression stack used for every nuisance function.

pub mod basis;
pub mod crossfit;
pub mod folds;
pub(crate) mod linalg;
pub mod logistic;
pub mod model;
pub mod stack;
pub mod wls;

pub use basis::{expand_basis, expand_matrix, Basis};
pub use crossfit::{cross_fit, CrossFitOutput, CrossFitPlan, FitTarget};
pub use folds::{make_folds, FoldAssignment};
pub use logistic::{fit_logistic_irls, fit_logistic_with, IrlsOptions};
pub use model::{Candidate, Family, GlmFit, LearnerMenu, LearnerSpec, Predictor, StackedModel};
pub use stack::{fit_super_learner, Loss};
pub use wls::fit_wls;

pub(crate) use model::{expit, logit};
