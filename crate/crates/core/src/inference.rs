//! Pointwise confidence intervals and simultaneous confidence bands over
//! all subgroup levels: bootstrap t-max and Gaussian-max constructions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubgroupSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::estimators::{cross_fit, CellEvaluator, CrossFit, Method, SubgroupEstimate};
use crate::nuisance::NuisanceSpec;
use crate::stats::{substream, upper_quantile, z_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandConstruction {
    BootstrapTMax,
    GaussianMax,
}

impl std::fmt::Display for BandConstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandConstruction::BootstrapTMax => write!(f, "bootstrap"),
            BandConstruction::GaussianMax => write!(f, "gaussian"),
        }
    }
}

/// What the band covers: one potential-outcome mean or a contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimand {
    Mean(usize),
    Contrast(usize, usize),
}

/// Simultaneous band over subgroup levels. Half-width per level is exactly
/// `critical * se`.
#[derive(Debug, Clone)]
pub struct BandResult {
    pub alpha: f64,
    pub construction: BandConstruction,
    pub critical: f64,
    pub levels: Vec<Vec<f64>>,
    pub points: Vec<f64>,
    pub ses: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Bootstrap replicates or Gaussian draws used.
    pub b: usize,
    /// The realized max statistics (bootstrap construction only).
    pub t_max_samples: Option<Vec<f64>>,
}

/// Wald interval point +/- z_{1-alpha/2} * se from the IF-based SE.
pub fn pointwise_ci(est: &SubgroupEstimate, alpha: f64) -> Result<(f64, f64)> {
    let se = est.se.ok_or(Error::NoSeAvailable {
        method: est.method.to_string(),
    })?;
    let z = z_two_sided(alpha);
    Ok((est.point - z * se, est.point + z * se))
}

/// Gaussian-max band: the critical value is the empirical (1-alpha)-quantile
/// of max_j |Z_j| over `draws` iid d-dimensional standard normal vectors.
pub fn band_gaussian_max(
    ests: &[SubgroupEstimate],
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<BandResult> {
    let points: Vec<f64> = ests.iter().map(|e| e.point).collect();
    let mut ses = Vec::with_capacity(ests.len());
    for e in ests {
        ses.push(e.se.ok_or(Error::NoSeAvailable {
            method: e.method.to_string(),
        })?);
    }
    let levels: Vec<Vec<f64>> = ests.iter().map(|e| e.subgroup.clone()).collect();
    band_gaussian_max_from(&points, &ses, levels, alpha, draws, seed)
}

pub fn band_gaussian_max_from(
    points: &[f64],
    ses: &[f64],
    levels: Vec<Vec<f64>>,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<BandResult> {
    let d = points.len();
    if d == 0 {
        return Err(Error::InvalidConfig("no estimates to band".into()));
    }
    let mut rng = substream(seed, 0);
    let mut maxima = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut m: f64 = 0.0;
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            m = m.max(z.abs());
        }
        maxima.push(m);
    }
    let critical = upper_quantile(&maxima, alpha);
    let (lower, upper) = make_bands(points, ses, critical);
    Ok(BandResult {
        alpha,
        construction: BandConstruction::GaussianMax,
        critical,
        levels,
        points: points.to_vec(),
        ses: ses.to_vec(),
        lower,
        upper,
        b: draws,
        t_max_samples: None,
    })
}

fn make_bands(points: &[f64], ses: &[f64], critical: f64) -> (Vec<f64>, Vec<f64>) {
    let lower = points
        .iter()
        .zip(ses.iter())
        .map(|(p, s)| p - critical * s)
        .collect();
    let upper = points
        .iter()
        .zip(ses.iter())
        .map(|(p, s)| p + critical * s)
        .collect();
    (lower, upper)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub b: usize,
    /// Refit nuisances on every bootstrap replicate (faithful, slow).
    /// When false, the original per-fold nuisance models are reused and
    /// only the estimation step is recomputed (fast approximation).
    pub refit: bool,
    pub folds: usize,
    pub seed: u64,
    /// Replicates that drop a subgroup cell are redrawn up to this many
    /// times before erroring.
    pub max_redraws: usize,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            b: 1000,
            refit: true,
            folds: 2,
            seed: 0,
            max_redraws: 10,
        }
    }
}

/// Bootstrap t-max band for the DR estimator.
///
/// Draws stratified nonparametric resamples (per-source sizes preserved,
/// plus the R=0 stratum for external targets), recomputes the point
/// estimates for every subgroup level, and takes
/// t^b_max = max_level |point^b - point| / se with the original-sample SE.
/// The critical value is the empirical (1-alpha)-quantile of t^b_max.
pub fn band_bootstrap(
    d: &Dataset,
    nspec: &NuisanceSpec,
    target: TargetSpec,
    estimand: Estimand,
    spec: &SubgroupSpec,
    alpha: f64,
    opts: &BootstrapOptions,
) -> Result<BandResult> {
    if opts.b < 200 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs B >= 200, got {}",
            opts.b
        )));
    }
    let cf = cross_fit(d, nspec, target, opts.folds, opts.seed)?;
    let (points, ses) = estimand_points(d, &cf, estimand, spec)?;
    let t_max = bootstrap_t_max(d, nspec, &cf, estimand, spec, &points, &ses, opts)?;
    let critical = upper_quantile(&t_max, alpha);
    let (lower, upper) = make_bands(&points, &ses, critical);
    Ok(BandResult {
        alpha,
        construction: BandConstruction::BootstrapTMax,
        critical,
        levels: spec.levels.clone(),
        points,
        ses,
        lower,
        upper,
        b: opts.b,
        t_max_samples: Some(t_max),
    })
}

/// DR points and SEs for every subgroup level under the estimand.
pub fn estimand_points(
    d: &Dataset,
    cf: &CrossFit,
    estimand: Estimand,
    spec: &SubgroupSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut points = Vec::with_capacity(spec.levels.len());
    let mut ses = Vec::with_capacity(spec.levels.len());
    match estimand {
        Estimand::Mean(a) => {
            let ev = CellEvaluator::new(d, cf, a)?;
            for level in 0..spec.levels.len() {
                let est = ev.estimate(Method::Dr, spec, level)?;
                points.push(est.point);
                ses.push(est.se.unwrap());
            }
        }
        Estimand::Contrast(a, b) => {
            let ev_a = CellEvaluator::new(d, cf, a)?;
            let ev_b = CellEvaluator::new(d, cf, b)?;
            for level in 0..spec.levels.len() {
                let ea = ev_a.estimate(Method::Dr, spec, level)?;
                let eb = ev_b.estimate(Method::Dr, spec, level)?;
                points.push(ea.point - eb.point);
                let (va, vb) = (ea.if_values.unwrap(), eb.if_values.unwrap());
                let sum_sq: f64 = va
                    .iter()
                    .zip(vb.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                let n = va.len() as f64;
                ses.push((sum_sq / (n * n)).sqrt());
            }
        }
    }
    Ok((points, ses))
}

/// The realized bootstrap max statistics (exposed for the runner, which
/// scores simultaneous coverage across replicates).
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_t_max(
    d: &Dataset,
    nspec: &NuisanceSpec,
    cf: &CrossFit,
    estimand: Estimand,
    spec: &SubgroupSpec,
    points: &[f64],
    ses: &[f64],
    opts: &BootstrapOptions,
) -> Result<Vec<f64>> {
    // strata over positions in cf.rows: source id, or n_sources for R=0
    let n_sources = d.n_sources();
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); n_sources + 1];
    for (pos, &i) in cf.rows.iter().enumerate() {
        let sid = d.s(i).unwrap_or(n_sources);
        strata[sid].push(pos);
    }
    let strata = std::sync::Arc::new(strata);

    // Pre-build evaluators for the fast (no-refit) path.
    let evaluators: Option<Vec<CellEvaluator<'_>>> = if opts.refit {
        None
    } else {
        let mut evs = Vec::new();
        match estimand {
            Estimand::Mean(a) => evs.push(CellEvaluator::new(d, cf, a)?),
            Estimand::Contrast(a, b) => {
                evs.push(CellEvaluator::new(d, cf, a)?);
                evs.push(CellEvaluator::new(d, cf, b)?);
            }
        }
        Some(evs)
    };

    let one_replicate = |b: usize| -> Result<f64> {
        for attempt in 0..=opts.max_redraws {
            let mut rng = substream(opts.seed, 1_000 + (b as u64) * 64 + attempt as u64);
            let mut positions = Vec::with_capacity(cf.rows.len());
            for members in strata.iter() {
                for _ in 0..members.len() {
                    positions.push(members[rng.gen_range(0..members.len())]);
                }
            }
            let rep = match &evaluators {
                Some(evs) => replicate_points_fixed(evs, estimand, spec, &positions),
                None => replicate_points_refit(d, nspec, cf, estimand, spec, &positions, &mut rng),
            };
            match rep {
                Ok(rep_points) => {
                    let mut t: f64 = 0.0;
                    for ((rp, p), s) in rep_points.iter().zip(points.iter()).zip(ses.iter()) {
                        let denom = s.max(f64::MIN_POSITIVE);
                        t = t.max((rp - p).abs() / denom);
                    }
                    return Ok(t);
                }
                Err(Error::ZeroCell { cell }) => {
                    if attempt == opts.max_redraws {
                        return Err(Error::BootstrapCellEmpty {
                            cell,
                            attempts: attempt + 1,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!()
    };

    (0..opts.b)
        .into_par_iter()
        .map(one_replicate)
        .collect::<Result<Vec<f64>>>()
}

fn replicate_points_fixed(
    evaluators: &[CellEvaluator<'_>],
    estimand: Estimand,
    spec: &SubgroupSpec,
    positions: &[usize],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.levels.len());
    for level in 0..spec.levels.len() {
        let value = match estimand {
            Estimand::Mean(_) => {
                evaluators[0].point_for_positions(Method::Dr, spec, level, positions)?
            }
            Estimand::Contrast(_, _) => {
                evaluators[0].point_for_positions(Method::Dr, spec, level, positions)?
                    - evaluators[1].point_for_positions(Method::Dr, spec, level, positions)?
            }
        };
        out.push(value);
    }
    Ok(out)
}

fn replicate_points_refit(
    d: &Dataset,
    nspec: &NuisanceSpec,
    cf: &CrossFit,
    estimand: Estimand,
    spec: &SubgroupSpec,
    positions: &[usize],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let rows: Vec<usize> = positions.iter().map(|&pos| cf.rows[pos]).collect();
    let resampled = d.subset(&rows);
    // fresh fold split per replicate from the replicate's stream
    let fold_seed: u64 = rng.gen();
    let cf_b = cross_fit(&resampled, nspec, cf.target, cf.k, fold_seed)?;
    let (points, _) = estimand_points(&resampled, &cf_b, estimand, spec)?;
    Ok(points)
}
