//! Estimation of subgroup potential-outcome means and treatment effects in
//! internal or external target populations from multi-source data.
//!
//! The crate provides doubly robust influence-function-based estimators with
//! stratified cross-fitting, plug-in (G-computation) and inverse probability
//! weighting comparators, pointwise confidence intervals, simultaneous
//! confidence bands (bootstrap t-max and Gaussian-max constructions), and a
//! Monte Carlo simulation subsystem for consistency, double-robustness, and
//! rate-robustness experiments.

pub mod data;
pub mod design;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod inference;
pub mod nuisance;
pub mod sim;
pub mod spline;
pub mod stats;

pub use data::{
    read_csv, subgroup_counts, CovariateKind, CsvColumns, Dataset, Observation, SubgroupSpec,
    TargetSpec,
};
pub use error::{Error, Result};
pub use estimators::{
    cross_fit, estimate_cell, estimate_effect, CrossFit, EffectEstimate, Method,
    SubgroupEstimate,
};
pub use inference::{
    band_bootstrap, band_gaussian_max, pointwise_ci, BandConstruction, BandResult, Estimand,
};
pub use nuisance::{
    fit_nuisances, perturb_oracle, NuisanceSet, NuisanceSpec, OutcomeModelKind,
    PerturbationConfig, PerturbationStyle, ProbModelKind,
};
