//! Monte Carlo experiment runner: bias/SD/SE/coverage tables for the main
//! consistency and double-robustness studies, and the RMSE sweep for the
//! rate-robustness study. Replicates run in parallel on seeded substreams,
//! so results do not depend on scheduling order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{SubgroupSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::estimators::{cross_fit, CellEvaluator, CrossFit, Method};
use crate::inference::{band_gaussian_max_from, bootstrap_t_max, BootstrapOptions, Estimand};
use crate::nuisance::{
    perturb_oracle, NuisanceSpec, PerturbationConfig, PerturbationStyle,
};
use crate::sim::main_dgp::{DgpMainConfig, MainDgp};
use crate::sim::rate_dgp::{generate_rate, rate_oracle, rate_truth, DgpRateConfig};
use crate::stats::{derive_seed, mean, upper_quantile, variance, z_two_sided};

/// Which nuisance groups are correctly specified in a simulation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correctness {
    pub outcome: bool,
    pub weights: bool,
}

impl Correctness {
    pub fn label(&self) -> &'static str {
        match (self.outcome, self.weights) {
            (true, true) => "both",
            (true, false) => "outcome",
            (false, true) => "weights",
            (false, false) => "none",
        }
    }

    pub fn all_blocks() -> Vec<Correctness> {
        vec![
            Correctness { outcome: true, weights: true },
            Correctness { outcome: true, weights: false },
            Correctness { outcome: false, weights: true },
            Correctness { outcome: false, weights: false },
        ]
    }
}

/// Covariates kept by the misspecified nuisance models (drops X5..X10).
pub const MISSPEC_KEEP: [usize; 4] = [0, 1, 2, 3];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MainOptions {
    pub n_total: usize,
    pub n_multisource: usize,
    /// External target (psi) instead of internal source 1 (phi).
    pub external: bool,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub blocks: Vec<Correctness>,
    pub folds: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Gaussian-max band draws per replicate (0 disables band scoring).
    pub gaussian_band_draws: usize,
    /// Number of leading replicates that also get bootstrap t-max bands.
    pub bootstrap_band_reps: usize,
    pub bootstrap_b: usize,
    pub bootstrap_refit: bool,
    pub truth_draws: usize,
    /// Fixed smoothing parameter for the correctly specified outcome GAM
    /// (None = GCV). The frozen default mirrors the reference experiments'
    /// flexible smooths.
    pub outcome_lambda: Option<f64>,
}

impl MainOptions {
    pub fn table_defaults(n_total: usize, n_multisource: usize, external: bool) -> Self {
        MainOptions {
            n_total,
            n_multisource,
            external,
            reps: 500,
            methods: vec![Method::Dr, Method::PlugIn, Method::Iptw],
            blocks: Correctness::all_blocks(),
            folds: 2,
            seed: 20_240_401,
            alpha: 0.05,
            gaussian_band_draws: 0,
            bootstrap_band_reps: 0,
            bootstrap_b: 500,
            bootstrap_refit: false,
            truth_draws: 10_000_000,
            outcome_lambda: Some(0.01),
        }
    }
}

/// Aggregated Monte Carlo metrics for one (block, method, level) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McCell {
    pub block: String,
    pub method: Method,
    /// Effect-modifier level (1..=5).
    pub level: usize,
    pub truth: f64,
    pub mean_bias: f64,
    pub mc_sd: f64,
    pub rmse: f64,
    pub mean_se: Option<f64>,
    pub pointwise_coverage: Option<f64>,
    pub band_coverage_gaussian: Option<f64>,
    pub band_coverage_bootstrap: Option<f64>,
    /// Pointwise coverage restricted to the bootstrap-scored replicates.
    pub pointwise_coverage_bootstrap_reps: Option<f64>,
    pub bootstrap_scored_reps: usize,
    pub reps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MainExperimentResult {
    pub target: String,
    pub n_total: usize,
    pub n_multisource: usize,
    pub truth: Vec<f64>,
    pub cells: Vec<McCell>,
    pub failures: usize,
    pub reps_requested: usize,
}

const LEVELS: [usize; 5] = [1, 2, 3, 4, 5];

struct RepOutcome {
    /// points[block][method][level]
    points: Vec<Vec<[f64; 5]>>,
    /// DR standard errors per block
    ses: Vec<Option<[f64; 5]>>,
    /// Gaussian and bootstrap band intervals per level (all-correct block)
    band_gaussian: Option<[(f64, f64); 5]>,
    band_bootstrap: Option<[(f64, f64); 5]>,
}

/// Run the main consistency / double-robustness experiment.
pub fn run_main_experiment(opts: &MainOptions) -> Result<MainExperimentResult> {
    let dgp = MainDgp::new(DgpMainConfig::new(opts.n_total, opts.n_multisource))?;
    let target = if opts.external {
        TargetSpec::External
    } else {
        TargetSpec::Internal { source: 0 }
    };
    let spec = SubgroupSpec {
        columns: vec![0],
        levels: LEVELS.iter().map(|&l| vec![l as f64]).collect(),
        exhaustive: true,
    };
    let truth: Vec<f64> = dgp
        .truth_table(
            opts.truth_draws,
            derive_seed(opts.seed, 0xF00D),
            &[1],
            &LEVELS,
            &[target],
        )
        .into_iter()
        .map(|(v, _)| v)
        .collect();

    let spec_correct = NuisanceSpec {
        spline: crate::nuisance::SplineOptionsConfig {
            fixed_lambda: opts.outcome_lambda,
            ..Default::default()
        },
        ..NuisanceSpec::default()
    };
    let spec_wrong_outcome = NuisanceSpec::misspecified_outcome(MISSPEC_KEEP.to_vec());
    let spec_wrong_weights = NuisanceSpec::misspecified_weights(MISSPEC_KEEP.to_vec());

    let need_correct = opts.blocks.iter().any(|b| b.outcome || b.weights);
    let need_wrong_outcome = opts.blocks.iter().any(|b| !b.outcome);
    let need_wrong_weights = opts.blocks.iter().any(|b| !b.weights);

    let outcomes: Vec<Result<RepOutcome>> = (0..opts.reps)
        .into_par_iter()
        .map(|rep| {
            run_main_replicate(
                &dgp,
                target,
                &spec,
                opts,
                rep,
                &spec_correct,
                &spec_wrong_outcome,
                &spec_wrong_weights,
                need_correct,
                need_wrong_outcome,
                need_wrong_weights,
            )
        })
        .collect();

    let mut successes = Vec::with_capacity(opts.reps);
    let mut first_failure = None;
    for out in outcomes {
        match out {
            Ok(o) => successes.push(o),
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
            }
        }
    }
    let failures = opts.reps - successes.len();
    if failures * 100 > opts.reps {
        return Err(Error::ReplicateFailures {
            failed: failures,
            total: opts.reps,
            first: first_failure.unwrap_or_default(),
        });
    }

    let z = z_two_sided(opts.alpha);
    let mut cells = Vec::new();
    for (bi, block) in opts.blocks.iter().enumerate() {
        for (mi, &method) in opts.methods.iter().enumerate() {
            for (li, &level) in LEVELS.iter().enumerate() {
                let pts: Vec<f64> = successes.iter().map(|o| o.points[bi][mi][li]).collect();
                let t = truth[li];
                let bias = mean(&pts) - t;
                let mc_sd = variance(&pts).sqrt();
                let rmse = (pts.iter().map(|p| (p - t) * (p - t)).sum::<f64>()
                    / pts.len() as f64)
                    .sqrt();
                let (mean_se, cover) = if method == Method::Dr {
                    let ses: Vec<f64> = successes
                        .iter()
                        .map(|o| o.ses[bi].unwrap()[li])
                        .collect();
                    let cover = successes
                        .iter()
                        .map(|o| {
                            let p = o.points[bi][mi][li];
                            let se = o.ses[bi].unwrap()[li];
                            f64::from((p - z * se..=p + z * se).contains(&t))
                        })
                        .sum::<f64>()
                        / successes.len() as f64;
                    (Some(mean(&ses)), Some(cover))
                } else {
                    (None, None)
                };
                // band coverage is collected on the all-correct block only
                let is_band_block = block.outcome && block.weights && method == Method::Dr;
                let band_gauss = if is_band_block && opts.gaussian_band_draws > 0 {
                    Some(
                        successes
                            .iter()
                            .map(|o| {
                                let (lo, hi) = o.band_gaussian.unwrap()[li];
                                f64::from(lo <= t && t <= hi)
                            })
                            .sum::<f64>()
                            / successes.len() as f64,
                    )
                } else {
                    None
                };
                let scored: Vec<&RepOutcome> = successes
                    .iter()
                    .filter(|o| o.band_bootstrap.is_some())
                    .collect();
                let (band_boot, ci_on_boot) = if is_band_block && !scored.is_empty() {
                    let bb = scored
                        .iter()
                        .map(|o| {
                            let (lo, hi) = o.band_bootstrap.unwrap()[li];
                            f64::from(lo <= t && t <= hi)
                        })
                        .sum::<f64>()
                        / scored.len() as f64;
                    let ci = scored
                        .iter()
                        .map(|o| {
                            let p = o.points[bi][mi][li];
                            let se = o.ses[bi].unwrap()[li];
                            f64::from((p - z * se..=p + z * se).contains(&t))
                        })
                        .sum::<f64>()
                        / scored.len() as f64;
                    (Some(bb), Some(ci))
                } else {
                    (None, None)
                };
                cells.push(McCell {
                    block: block.label().into(),
                    method,
                    level,
                    truth: t,
                    mean_bias: bias,
                    mc_sd,
                    rmse,
                    mean_se,
                    pointwise_coverage: cover,
                    band_coverage_gaussian: band_gauss,
                    band_coverage_bootstrap: band_boot,
                    pointwise_coverage_bootstrap_reps: ci_on_boot,
                    bootstrap_scored_reps: scored.len(),
                    reps: successes.len(),
                });
            }
        }
    }
    Ok(MainExperimentResult {
        target: target.to_string(),
        n_total: opts.n_total,
        n_multisource: opts.n_multisource,
        truth,
        cells,
        failures,
        reps_requested: opts.reps,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_main_replicate(
    dgp: &MainDgp,
    target: TargetSpec,
    spec: &SubgroupSpec,
    opts: &MainOptions,
    rep: usize,
    spec_correct: &NuisanceSpec,
    spec_wrong_outcome: &NuisanceSpec,
    spec_wrong_weights: &NuisanceSpec,
    need_correct: bool,
    need_wrong_outcome: bool,
    need_wrong_weights: bool,
) -> Result<RepOutcome> {
    let rep_seed = derive_seed(opts.seed, rep as u64);
    let d = dgp.generate(rep_seed);

    let cf_correct = if need_correct {
        Some(cross_fit(&d, spec_correct, target, opts.folds, rep_seed)?)
    } else {
        None
    };
    let cf_wrong_outcome = if need_wrong_outcome {
        Some(cross_fit(&d, spec_wrong_outcome, target, opts.folds, rep_seed)?)
    } else {
        None
    };
    // weight misspecification shares the fold split; the wrong-weights fit
    // is only needed when some block crosses correct outcome with wrong
    // weights (its outcome side is replaced anyway)
    let cf_wrong_weights = if need_wrong_weights {
        Some(cross_fit(&d, spec_wrong_weights, target, opts.folds, rep_seed)?)
    } else {
        None
    };

    let block_cf = |block: &Correctness| -> CrossFit {
        let base = match (block.outcome, block.weights) {
            (true, true) => cf_correct.as_ref().unwrap(),
            (false, false) => cf_wrong_outcome.as_ref().unwrap(),
            (true, false) => cf_wrong_weights.as_ref().unwrap(),
            (false, true) => cf_correct.as_ref().unwrap(),
        };
        let nuisances = match (block.outcome, block.weights) {
            (true, true) | (false, false) => base.nuisances.clone(),
            (true, false) => {
                // wrong weights, correct outcome
                let correct = cf_correct.as_ref().unwrap();
                base.nuisances
                    .iter()
                    .zip(correct.nuisances.iter())
                    .map(|(w, c)| w.with_outcome_from(c))
                    .collect()
            }
            (false, true) => {
                // correct weights, wrong outcome
                let wrong = cf_wrong_outcome.as_ref().unwrap();
                base.nuisances
                    .iter()
                    .zip(wrong.nuisances.iter())
                    .map(|(c, w)| c.with_outcome_from(w))
                    .collect()
            }
        };
        CrossFit {
            target,
            rows: base.rows.clone(),
            fold_of: base.fold_of.clone(),
            k: base.k,
            nuisances,
        }
    };

    let mut points = Vec::with_capacity(opts.blocks.len());
    let mut ses = Vec::with_capacity(opts.blocks.len());
    let mut band_gaussian = None;
    let mut band_bootstrap = None;
    for block in &opts.blocks {
        let cf = block_cf(block);
        let ev = CellEvaluator::new(&d, &cf, 1)?;
        let mut block_points = Vec::with_capacity(opts.methods.len());
        let mut block_se: Option<[f64; 5]> = None;
        for &method in &opts.methods {
            let mut pts = [0.0; 5];
            let mut se_arr = [0.0; 5];
            for li in 0..LEVELS.len() {
                let est = ev.estimate(method, spec, li)?;
                pts[li] = est.point;
                if method == Method::Dr {
                    se_arr[li] = est.se.unwrap();
                }
            }
            if method == Method::Dr {
                block_se = Some(se_arr);
            }
            block_points.push(pts);
        }
        // bands on the all-correct block
        if block.outcome && block.weights {
            if let Some(se_arr) = block_se {
                let dr_idx = opts.methods.iter().position(|&m| m == Method::Dr);
                if let Some(mi) = dr_idx {
                    let pts = block_points[mi];
                    if opts.gaussian_band_draws > 0 {
                        let band = band_gaussian_max_from(
                            &pts,
                            &se_arr,
                            spec.levels.clone(),
                            opts.alpha,
                            opts.gaussian_band_draws,
                            derive_seed(rep_seed, 0xB4),
                        )?;
                        let mut arr = [(0.0, 0.0); 5];
                        for li in 0..5 {
                            arr[li] = (band.lower[li], band.upper[li]);
                        }
                        band_gaussian = Some(arr);
                    }
                    if rep < opts.bootstrap_band_reps {
                        let bopts = BootstrapOptions {
                            b: opts.bootstrap_b,
                            refit: opts.bootstrap_refit,
                            folds: opts.folds,
                            seed: derive_seed(rep_seed, 0xB007),
                            max_redraws: 10,
                        };
                        let t_max = bootstrap_t_max(
                            &d,
                            spec_correct,
                            &cf,
                            Estimand::Mean(1),
                            spec,
                            &pts,
                            &se_arr,
                            &bopts,
                        )?;
                        let critical = upper_quantile(&t_max, opts.alpha);
                        let mut arr = [(0.0, 0.0); 5];
                        for li in 0..5 {
                            arr[li] = (
                                pts[li] - critical * se_arr[li],
                                pts[li] + critical * se_arr[li],
                            );
                        }
                        band_bootstrap = Some(arr);
                    }
                }
            }
        }
        points.push(block_points);
        ses.push(block_se);
    }

    Ok(RepOutcome {
        points,
        ses,
        band_gaussian,
        band_bootstrap,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateOptions {
    pub ns: Vec<usize>,
    pub r_grid: Vec<f64>,
    pub reps: usize,
    pub h: f64,
    pub seed: u64,
    pub style: PerturbationStyle,
    pub trim_epsilon: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            ns: vec![100, 500, 1000],
            r_grid: (0..=8).map(|k| 0.10 + 0.05 * k as f64).collect(),
            reps: 1000,
            h: 2.5,
            seed: 7_654_321,
            style: PerturbationStyle::PerPoint,
            trim_epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCell {
    pub n: usize,
    pub r: f64,
    pub method: Method,
    pub rmse: f64,
    pub mean_bias: f64,
    pub mc_sd: f64,
    pub reps: usize,
}

/// Rate-robustness sweep: perturbed-oracle nuisances with error O(n^-r),
/// comparing the DR and plug-in estimators of phi_{1,1}(X0=1).
pub fn run_rate_experiment(opts: &RateOptions) -> Result<Vec<RateCell>> {
    let truth = rate_truth();
    let target = TargetSpec::Internal { source: 0 };
    let spec = SubgroupSpec {
        columns: vec![0],
        levels: vec![vec![1.0]],
        exhaustive: false,
    };
    let oracle = rate_oracle(opts.trim_epsilon);
    let mut cells = Vec::new();
    for &n in &opts.ns {
        for (ri, &r) in opts.r_grid.iter().enumerate() {
            let outcomes: Vec<Result<(f64, f64)>> = (0..opts.reps)
                .into_par_iter()
                .map(|rep| {
                    let stream = (n as u64) << 32 | (ri as u64) << 16 | rep as u64;
                    let rep_seed = derive_seed(opts.seed, stream);
                    let d = generate_rate(&DgpRateConfig { n }, rep_seed);
                    let mut pcfg = PerturbationConfig::new(opts.h, r, derive_seed(rep_seed, 1));
                    pcfg.style = opts.style;
                    let perturbed = perturb_oracle(&oracle, &pcfg, n);
                    let cf = CrossFit::single(&d, target, perturbed)?;
                    let ev = CellEvaluator::new(&d, &cf, 1)?;
                    let dr = ev.estimate(Method::Dr, &spec, 0)?.point;
                    let plug = ev.estimate(Method::PlugIn, &spec, 0)?.point;
                    Ok((dr, plug))
                })
                .collect();
            let mut dr_pts = Vec::new();
            let mut plug_pts = Vec::new();
            let mut failures = 0usize;
            let mut first = String::new();
            for out in outcomes {
                match out {
                    Ok((a, b)) => {
                        dr_pts.push(a);
                        plug_pts.push(b);
                    }
                    Err(e) => {
                        if failures == 0 {
                            first = e.to_string();
                        }
                        failures += 1;
                    }
                }
            }
            if failures * 100 > opts.reps {
                return Err(Error::ReplicateFailures {
                    failed: failures,
                    total: opts.reps,
                    first,
                });
            }
            for (method, pts) in [(Method::Dr, &dr_pts), (Method::PlugIn, &plug_pts)] {
                let rmse = (pts.iter().map(|p| (p - truth) * (p - truth)).sum::<f64>()
                    / pts.len() as f64)
                    .sqrt();
                cells.push(RateCell {
                    n,
                    r,
                    method,
                    rmse,
                    mean_bias: mean(pts) - truth,
                    mc_sd: variance(pts).sqrt(),
                    reps: pts.len(),
                });
            }
        }
    }
    Ok(cells)
}

/// Long-format CSV for the main experiment.
pub fn write_main_csv<W: std::io::Write>(
    result: &MainExperimentResult,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "target,n_total,n_multisource,block,method,level,truth,bias,mc_sd,rmse,mean_se,\
         cover_pointwise,cover_band_gaussian,cover_band_bootstrap,cover_pointwise_boot_reps,\
         bootstrap_scored_reps,reps"
    )?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for c in &result.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{},{}",
            result.target,
            result.n_total,
            result.n_multisource,
            c.block,
            c.method,
            c.level,
            c.truth,
            c.mean_bias,
            c.mc_sd,
            c.rmse,
            fmt(c.mean_se),
            fmt(c.pointwise_coverage),
            fmt(c.band_coverage_gaussian),
            fmt(c.band_coverage_bootstrap),
            fmt(c.pointwise_coverage_bootstrap_reps),
            c.bootstrap_scored_reps,
            c.reps
        )?;
    }
    Ok(())
}

/// Long-format CSV for the rate experiment (n, r, estimator, RMSE).
pub fn write_rate_csv<W: std::io::Write>(cells: &[RateCell], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,r,method,rmse,bias,mc_sd,reps")?;
    for c in cells {
        writeln!(
            w,
            "{},{:.2},{},{:.6},{:.6},{:.6},{}",
            c.n, c.r, c.method, c.rmse, c.mean_bias, c.mc_sd, c.reps
        )?;
    }
    Ok(())
}
