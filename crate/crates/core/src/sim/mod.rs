//! Simulation subsystem: data-generating processes, intercept calibration,
//! truth oracles, and the Monte Carlo experiment runner.

pub mod main_dgp;
pub mod rate_dgp;
pub mod runner;

pub use main_dgp::{
    calibrate_intercept, calibrate_source_intercepts, potential_mean, DgpMainConfig, MainDgp,
};
pub use rate_dgp::{generate_rate, outcome_mean, rate_oracle, rate_truth, DgpRateConfig};
pub use runner::{
    run_main_experiment, run_rate_experiment, write_main_csv, write_rate_csv, Correctness,
    MainExperimentResult, MainOptions, McCell, RateCell, RateOptions,
};
