use thiserror::Error;

/// Errors raised while validating or loading data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("row {row}: validated row (r=1) is missing gold-standard {field}")]
    MissingGoldStandard { row: usize, field: &'static str },
    #[error("row {row}: unvalidated row (r=0) carries gold-standard {field}")]
    UnexpectedGoldStandard { row: usize, field: &'static str },
    #[error("no validated rows with A={arm}")]
    EmptyArm { arm: u8 },
    #[error("row {row}: expected {expected} covariates, found {found}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}: kappa {value} outside (0,1]")]
    KappaOutOfRange { row: usize, value: f64 },
    #[error("row {row}: non-finite value in {field}")]
    NonFinite { row: usize, field: &'static str },
    #[error("dataset has no validated rows")]
    NoValidatedRows,
    #[error("dataset is empty")]
    Empty,
    #[error("csv schema: {0}")]
    Schema(String),
    #[error("row {row}: {message}")]
    BadField { row: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// Errors raised by the regression stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("all observation weights are zero")]
    AllZeroWeights,
    #[error("logistic fit did not converge after {iterations} iterations (score norm {score_norm:.3e})")]
    NonConvergence { iterations: usize, score_norm: f64 },
    #[error("every super learner candidate failed: {0}")]
    SuperLearnerFailed(String),
    #[error("need 2 <= K <= n folds, got K={k} for n={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("unknown learner spec {0:?}")]
    UnknownSpec(String),
    #[error("stacked learners need at least 3 cross-fitting folds, got {0}")]
    TooFewFoldsForStacking(usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Errors raised while fitting nuisance functions or estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("kappa mode {0} requires a kappa value on every row")]
    MissingKappa(&'static str),
    #[error("chi requires a validated row (row {0} has r=0)")]
    UnvalidatedRow(usize),
    #[error("all EEM weights fall below the degeneracy threshold")]
    DegenerateWeights,
    #[error("validated outcomes have zero range; cannot rescale for the logistic fluctuation")]
    DegenerateOutcomeRange,
    #[error("influence vectors differ in length ({0} vs {1})")]
    MismatchedLength(usize, usize),
    #[error("need at least 2 rows for variance estimation, got {0}")]
    TooFewRows(usize),
    #[error("gold-standard A and Y are not available on every row")]
    GoldUnavailable,
    #[error("nuisance {0} was not fitted")]
    MissingNuisance(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}
