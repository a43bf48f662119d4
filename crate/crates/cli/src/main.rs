//! `mste` command line: subgroup treatment-effect estimation from CSV data,
//! plus the simulation and rate-robustness experiment runners.
//!
//! Exit codes: 0 success, 2 input/validation error, 3 estimation error,
//! 4 excessive replicate failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mste_core::data::{read_csv, CsvColumns, Dataset, SubgroupSpec, TargetSpec};
use mste_core::estimators::{cross_fit, estimate_effect, CellEvaluator, Method};
use mste_core::inference::{
    band_bootstrap, band_gaussian_max_from, estimand_points, BandResult, BootstrapOptions,
    Estimand,
};
use mste_core::nuisance::{NuisanceSpec, OutcomeModelKind, SplineOptionsConfig};
use mste_core::sim::{
    run_main_experiment, run_rate_experiment, write_main_csv, write_rate_csv, MainOptions,
    RateOptions,
};
use mste_core::stats::z_two_sided;
use mste_core::Error;

#[derive(Parser, Debug)]
#[command(name = "mste", version, about = "Subgroup treatment effects from multi-source data")]
struct Cli {
    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, env = "MSTE_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate subgroup means/effects from a CSV dataset.
    Estimate(EstimateArgs),
    /// Reproduce the consistency / double-robustness Monte Carlo tables.
    Simulate(SimulateArgs),
    /// Reproduce the rate-robustness RMSE sweep.
    Rate(RateArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct EstimateArgs {
    /// Input CSV: columns y, a, s, r, then covariates; empty cells are NA.
    #[arg(long, env = "MSTE_INPUT")]
    input: PathBuf,
    /// Target population: `internal:<source-label>` or `external`.
    #[arg(long, env = "MSTE_TARGET")]
    target: String,
    /// Effect-modifier columns (names or indices), comma separated.
    #[arg(long, env = "MSTE_SUBGROUP")]
    subgroup: String,
    /// One treatment label for means, or `a,b` for the contrast a - b.
    #[arg(long, env = "MSTE_TREATMENTS")]
    treatments: String,
    /// Estimators to run.
    #[arg(long, env = "MSTE_METHODS", default_value = "dr,plugin,iptw")]
    methods: String,
    #[arg(long, env = "MSTE_ALPHA", default_value_t = 0.05)]
    alpha: f64,
    /// Simultaneous band construction: bootstrap, gaussian, or both.
    #[arg(long, env = "MSTE_BAND", default_value = "both")]
    band: String,
    /// Bootstrap replicates.
    #[arg(long = "B", env = "MSTE_B", default_value_t = 1000)]
    b: usize,
    /// Refit nuisances on each bootstrap replicate (slow, faithful).
    #[arg(long, env = "MSTE_REFIT", default_value_t = true, action = clap::ArgAction::Set)]
    refit: bool,
    #[arg(long, env = "MSTE_FOLDS", default_value_t = 2)]
    folds: usize,
    #[arg(long, env = "MSTE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "MSTE_OUT", default_value = "mste-out")]
    out: PathBuf,
    /// Outcome model: spline or linear.
    #[arg(long, default_value = "spline")]
    outcome_model: String,
    /// Fixed smoothing parameter for the outcome splines (default: GCV).
    #[arg(long)]
    lambda: Option<f64>,
    /// Probability trimming bound.
    #[arg(long, default_value_t = 0.01)]
    trim: f64,
    /// Column-name overrides.
    #[arg(long, default_value = "y")]
    col_y: String,
    #[arg(long, default_value = "a")]
    col_a: String,
    #[arg(long, default_value = "s")]
    col_s: String,
    #[arg(long, default_value = "r")]
    col_r: String,
    /// Gaussian-max draws.
    #[arg(long, default_value_t = 500_000)]
    gaussian_draws: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    /// Scenario id: `main-internal` or `main-external`.
    #[arg(long, env = "MSTE_SCENARIO", default_value = "main-internal")]
    scenario: String,
    #[arg(long, env = "MSTE_NTOTAL", default_value_t = 10_000)]
    n_total: usize,
    /// Multi-source sample size (sum over sources).
    #[arg(long, env = "MSTE_NMS", default_value_t = 1000)]
    n_ms: usize,
    #[arg(long, env = "MSTE_REPS", default_value_t = 500)]
    reps: usize,
    #[arg(long, env = "MSTE_SEED", default_value_t = 20240401)]
    seed: u64,
    #[arg(long, env = "MSTE_ALPHA", default_value_t = 0.05)]
    alpha: f64,
    /// Score pointwise and simultaneous band coverage per replicate.
    #[arg(long, default_value_t = false)]
    bands: bool,
    /// Replicates that also get bootstrap t-max bands (0 disables).
    #[arg(long, default_value_t = 0)]
    bootstrap_band_reps: usize,
    #[arg(long, default_value_t = 500)]
    bootstrap_b: usize,
    #[arg(long, env = "MSTE_OUT", default_value = "mste-out")]
    out: PathBuf,
    /// Paper-scale configuration (5000 reps); not part of CI.
    #[arg(long, default_value_t = false)]
    full: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RateArgs {
    /// Sample sizes, comma separated.
    #[arg(long, default_value = "100,500,1000")]
    ns: String,
    #[arg(long, env = "MSTE_REPS", default_value_t = 1000)]
    reps: usize,
    #[arg(long, env = "MSTE_SEED", default_value_t = 7654321)]
    seed: u64,
    #[arg(long, env = "MSTE_OUT", default_value = "mste-out")]
    out: PathBuf,
    /// Paper-scale configuration (5000 reps); not part of CI.
    #[arg(long, default_value_t = false)]
    full: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Rate(args) => cmd_rate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MixedMissingness { .. }
        | Error::EmptySource { .. }
        | Error::NonFiniteCovariate { .. }
        | Error::InvalidConfig(_)
        | Error::Csv(_)
        | Error::Io(_) => 2,
        Error::ReplicateFailures { .. } => 4,
        _ => 3,
    }
}

#[derive(Serialize)]
struct Manifest<T: Serialize> {
    tool: String,
    version: String,
    command: String,
    config: T,
    warnings: Vec<String>,
}

fn write_manifest<T: Serialize>(
    out: &Path,
    command: &str,
    config: &T,
    warnings: &[String],
) -> Result<(), Error> {
    let manifest = Manifest {
        tool: "mste".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config,
        warnings: warnings.to_vec(),
    };
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap() + "\n")?;
    Ok(())
}

fn parse_target(d: &Dataset, raw: &str) -> Result<TargetSpec, Error> {
    if raw == "external" {
        return Ok(TargetSpec::External);
    }
    if let Some(label) = raw.strip_prefix("internal:") {
        let source = d
            .source_labels()
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown source label `{label}`; have {:?}",
                    d.source_labels()
                ))
            })?;
        return Ok(TargetSpec::Internal { source });
    }
    Err(Error::InvalidConfig(format!(
        "target must be `internal:<source>` or `external`, got `{raw}`"
    )))
}

fn parse_columns(d: &Dataset, raw: &str) -> Result<Vec<usize>, Error> {
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Ok(idx) = tok.parse::<usize>() {
                if idx < d.p() {
                    return Ok(idx);
                }
                return Err(Error::InvalidConfig(format!(
                    "covariate index {idx} out of range (p = {})",
                    d.p()
                )));
            }
            d.covariate_names()
                .iter()
                .position(|n| n == tok)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "unknown covariate `{tok}`; have {:?}",
                        d.covariate_names()
                    ))
                })
        })
        .collect()
}

fn parse_treatment(d: &Dataset, label: &str) -> Result<usize, Error> {
    d.treatment_labels()
        .iter()
        .position(|l| l == label.trim())
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown treatment label `{label}`; have {:?}",
                d.treatment_labels()
            ))
        })
}

fn parse_methods(raw: &str) -> Result<Vec<Method>, Error> {
    raw.split(',')
        .map(|tok| match tok.trim() {
            "dr" => Ok(Method::Dr),
            "plugin" => Ok(Method::PlugIn),
            "iptw" => Ok(Method::Iptw),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}` (expected dr, plugin, iptw)"
            ))),
        })
        .collect()
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Error> {
    let columns = CsvColumns {
        y: args.col_y.clone(),
        a: args.col_a.clone(),
        s: args.col_s.clone(),
        r: args.col_r.clone(),
    };
    let d = read_csv(&args.input, &columns)?.validate()?;
    for w in d.warnings() {
        eprintln!("warning: {w}");
    }
    let target = parse_target(&d, &args.target)?;
    let subgroup_cols = parse_columns(&d, &args.subgroup)?;
    let spec = SubgroupSpec::enumerate(&d, subgroup_cols, target)?;
    let methods = parse_methods(&args.methods)?;
    let treatments: Vec<usize> = args
        .treatments
        .split(',')
        .map(|t| parse_treatment(&d, t))
        .collect::<Result<_, _>>()?;
    if treatments.is_empty() || treatments.len() > 2 {
        return Err(Error::InvalidConfig(
            "expected one treatment label or a pair `a,b`".into(),
        ));
    }
    let nspec = NuisanceSpec {
        outcome_model: match args.outcome_model.as_str() {
            "spline" => OutcomeModelKind::SplineAdditive,
            "linear" => OutcomeModelKind::Linear,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown outcome model `{other}` (expected spline or linear)"
                )))
            }
        },
        trim_epsilon: args.trim,
        spline: SplineOptionsConfig {
            fixed_lambda: args.lambda,
            ..SplineOptionsConfig::default()
        },
        ..NuisanceSpec::default()
    };

    fs::create_dir_all(&args.out)?;
    let cf = cross_fit(&d, &nspec, target, args.folds, args.seed)?;
    let mut nuisance_warnings = Vec::new();
    for ns in &cf.nuisances {
        nuisance_warnings.extend(ns.warnings.iter().cloned());
    }
    for w in &nuisance_warnings {
        eprintln!("warning: {w}");
    }

    // estimates.csv: one row per (method, treatment or pair, level)
    let mut rows = Vec::new();
    for &method in &methods {
        for &a in &treatments {
            let ev = CellEvaluator::new(&d, &cf, a)?;
            for level in 0..spec.levels.len() {
                let est = ev.estimate(method, &spec, level)?;
                rows.push((
                    method,
                    d.treatment_labels()[a].clone(),
                    spec.level_label(level),
                    est.point,
                    est.se,
                    est.n_cell,
                    est.max_weight,
                    est.folds,
                ));
            }
        }
        if let [a, b] = treatments[..] {
            for level in 0..spec.levels.len() {
                let eff = estimate_effect(&d, &cf, method, (a, b), &spec, level)?;
                rows.push((
                    method,
                    format!(
                        "{}-{}",
                        d.treatment_labels()[a],
                        d.treatment_labels()[b]
                    ),
                    spec.level_label(level),
                    eff.point,
                    eff.se,
                    0,
                    f64::NAN,
                    args.folds,
                ));
            }
        }
    }
    let mut csv = String::from("target,method,treatment,subgroup,point,se,n_cell,max_weight,folds\n");
    for (method, treat, level, point, se, n_cell, max_w, folds) in &rows {
        csv.push_str(&format!(
            "{target},{method},{treat},\"{level}\",{point:.6},{},{n_cell},{},{folds}\n",
            se.map_or(String::new(), |s| format!("{s:.6}")),
            if max_w.is_nan() {
                String::new()
            } else {
                format!("{max_w:.4}")
            },
        ));
    }
    fs::write(args.out.join("estimates.csv"), csv)?;

    // bands.csv for the DR estimand (contrast if a pair was given)
    let estimand = match treatments[..] {
        [a] => Estimand::Mean(a),
        [a, b] => Estimand::Contrast(a, b),
        _ => unreachable!(),
    };
    let (points, ses) = estimand_points(&d, &cf, estimand, &spec)?;
    let mut bands: Vec<BandResult> = Vec::new();
    if args.band == "gaussian" || args.band == "both" {
        bands.push(band_gaussian_max_from(
            &points,
            &ses,
            spec.levels.clone(),
            args.alpha,
            args.gaussian_draws,
            args.seed,
        )?);
    }
    if args.band == "bootstrap" || args.band == "both" {
        let opts = BootstrapOptions {
            b: args.b,
            refit: args.refit,
            folds: args.folds,
            seed: args.seed,
            max_redraws: 10,
        };
        bands.push(band_bootstrap(
            &d, &nspec, target, estimand, &spec, args.alpha, &opts,
        )?);
    }
    let z = z_two_sided(args.alpha);
    let mut band_csv = String::from(
        "subgroup,point,se,ci_lower,ci_upper,band_lower,band_upper,construction,critical,B,band_contains_ci\n",
    );
    for band in &bands {
        for (k, level) in spec.levels.iter().enumerate() {
            let label = level
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(",");
            let (ci_lo, ci_hi) = (points[k] - z * ses[k], points[k] + z * ses[k]);
            band_csv.push_str(&format!(
                "\"{label}\",{:.6},{:.6},{ci_lo:.6},{ci_hi:.6},{:.6},{:.6},{},{:.4},{},{}\n",
                points[k],
                ses[k],
                band.lower[k],
                band.upper[k],
                band.construction,
                band.critical,
                band.b,
                band.lower[k] <= ci_lo && band.upper[k] >= ci_hi,
            ));
        }
    }
    fs::write(args.out.join("bands.csv"), band_csv)?;

    // nuisance coefficient audit
    let mut coef_csv = String::from("fold,model,term,value\n");
    for ns in &cf.nuisances {
        for (model, term, value) in &ns.coefficient_report {
            coef_csv.push_str(&format!("{},{model},\"{term}\",{value:.6}\n", ns.fold_id));
        }
    }
    fs::write(args.out.join("nuisance_coefficients.csv"), coef_csv)?;

    write_manifest(&args.out, "estimate", args, &nuisance_warnings)?;
    println!(
        "wrote {} estimate rows and {} band construction(s) to {}",
        rows.len(),
        bands.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let external = match args.scenario.as_str() {
        "main-internal" => false,
        "main-external" => true,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown scenario `{other}`; valid: main-internal, main-external"
            )))
        }
    };
    let mut opts = MainOptions::table_defaults(args.n_total, args.n_ms, external);
    opts.reps = if args.full { 5000 } else { args.reps };
    opts.seed = args.seed;
    opts.alpha = args.alpha;
    if args.bands {
        opts.gaussian_band_draws = 200_000;
        opts.bootstrap_band_reps = args.bootstrap_band_reps;
        opts.bootstrap_b = args.bootstrap_b;
    }
    if args.full {
        opts.n_total = 100_000;
    }
    let result = run_main_experiment(&opts)?;
    fs::create_dir_all(&args.out)?;
    let mut buf = Vec::new();
    write_main_csv(&result, &mut buf)?;
    fs::write(args.out.join("results.csv"), buf)?;
    write_manifest(&args.out, "simulate", args, &[])?;

    println!(
        "scenario {} n_total={} n_ms={} reps={} failures={}",
        args.scenario, result.n_total, result.n_multisource, result.reps_requested, result.failures
    );
    println!(
        "{:<8} {:<8} {:>5} {:>8} {:>8} {:>8} {:>8}",
        "block", "method", "level", "bias", "mc_sd", "mean_se", "cover"
    );
    for c in &result.cells {
        if c.level != 3 {
            continue;
        }
        println!(
            "{:<8} {:<8} {:>5} {:>8.3} {:>8.3} {:>8} {:>8}",
            c.block,
            c.method.to_string(),
            c.level,
            c.mean_bias,
            c.mc_sd,
            c.mean_se.map_or("-".into(), |v| format!("{v:.3}")),
            c.pointwise_coverage
                .map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
    Ok(())
}

fn cmd_rate(args: &RateArgs) -> Result<(), Error> {
    let ns: Vec<usize> = args
        .ns
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad sample size `{tok}`")))
        })
        .collect::<Result<_, _>>()?;
    let mut opts = RateOptions {
        ns,
        reps: if args.full { 5000 } else { args.reps },
        seed: args.seed,
        ..RateOptions::default()
    };
    if args.full {
        opts.reps = 5000;
    }
    let cells = run_rate_experiment(&opts)?;
    fs::create_dir_all(&args.out)?;
    let mut buf = Vec::new();
    write_rate_csv(&cells, &mut buf)?;
    fs::write(args.out.join("rate.csv"), buf)?;
    write_manifest(&args.out, "rate", args, &[])?;
    println!("{:>6} {:>5} {:>8} {:>10}", "n", "r", "method", "rmse");
    for c in &cells {
        println!("{:>6} {:>5.2} {:>8} {:>10.4}", c.n, c.r, c.method.to_string(), c.rmse);
    }
    Ok(())
}
