//! Estimators of E[Y(a)] and the ATE, with influence-curve inference.

pub mod aipw;
pub mod ensemble;
pub mod inference;
pub mod onestep;
pub mod pipeline;
pub mod tmle;

pub use aipw::{aipw_complete, OutcomeSource};
pub use ensemble::{ensemble, ensemble_weight};
pub use inference::{ate_from_arms, variance_from_ic};
pub use onestep::{eic_approach1, eic_approach2, onestep1, onestep2, plugin1, plugin2, plugin_result, VarphiVariant};
pub use pipeline::{estimate_methods, ArmResults, EstimateOptions};
pub use tmle::{tmle2, tmle2_with, TmleOptions};
