use thiserror::Error;

/// Errors surfaced by dataset validation, model fitting, and estimation.
#[derive(Error, Debug)]
pub enum Error {
    #[error("row {row}: R={r} but missingness pattern is inconsistent ({detail})")]
    MixedMissingness { row: usize, r: u8, detail: String },

    #[error("source {name} has no observations")]
    EmptySource { name: String },

    #[error("row {row}, covariate {column}: non-finite value")]
    NonFiniteCovariate { row: usize, column: String },

    #[error("subgroup cell {cell} is empty in the target population")]
    ZeroCell { cell: String },

    #[error("non-finite weight encountered during estimation ({detail})")]
    NonFiniteWeight { detail: String },

    #[error("logistic fit did not converge; data appear separated (try ridge > 0)")]
    Separation,

    #[error("design matrix is rank deficient ({detail})")]
    RankDeficient { detail: String },

    #[error("response vector contains non-finite values")]
    NonFiniteResponse,

    #[error("treatment {treatment} has {count} training rows in fold {fold} (need >= {min})")]
    InsufficientTreatedRows {
        treatment: String,
        fold: usize,
        count: usize,
        min: usize,
    },

    #[error("stratum {stratum} has {count} rows, fewer than {folds} folds")]
    StratumTooSmall {
        stratum: String,
        count: usize,
        folds: usize,
    },

    #[error("no standard error available for method {method}; influence-function inference is defined for the DR estimator only")]
    NoSeAvailable { method: String },

    #[error("bootstrap replicate dropped subgroup cell {cell} after {attempts} redraws")]
    BootstrapCellEmpty { cell: String, attempts: usize },

    #[error("intercept calibration target {target} not achievable within bracket [{lo}, {hi}]")]
    Unachievable { target: f64, lo: f64, hi: f64 },

    #[error("calibration did not converge after {sweeps} sweeps (residual {residual})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv input error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{failed} of {total} simulation replicates failed (first: {first})")]
    ReplicateFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
