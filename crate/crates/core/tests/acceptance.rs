//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line. Monte Carlo experiments are seeded, so the
//! suite is deterministic.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use mste_core::data::{read_csv, CsvColumns, SubgroupSpec, TargetSpec};
use mste_core::estimators::{cross_fit, CellEvaluator, Method};
use mste_core::glm::fit_logistic;
use mste_core::inference::{
    band_gaussian_max_from, bootstrap_t_max, estimand_points, BootstrapOptions, Estimand,
};
use mste_core::nuisance::NuisanceSpec;
use mste_core::sim::{
    run_main_experiment, run_rate_experiment, DgpMainConfig, MainDgp, MainOptions, McCell,
    RateOptions,
};
use mste_core::spline::{fit_spline_additive, SplineOptions};
use mste_core::stats::{derive_seed, normal_quantile, substream, upper_quantile};

const SEED: u64 = 20_240_401;

fn report(criterion: &str, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} {name}: {detail}");
}

fn cell<'a>(cells: &'a [McCell], block: &str, method: Method, level: usize) -> &'a McCell {
    cells
        .iter()
        .find(|c| c.block == block && c.method == method && c.level == level)
        .expect("cell present")
}

// ---------------------------------------------------------------------
// Criterion 1 is covered exactly in tests/oracle_equivalence.rs; it is
// re-run here through the same entry points for the pass/fail line.
// ---------------------------------------------------------------------
#[test]
fn c1_oracle_equivalence() {
    let start = Instant::now();
    let status = std::panic::catch_unwind(|| {
        // the dedicated test file holds the full enumeration; here we assert
        // the library-level equivalence on the same kind of instance
        let d = tiny_instance();
        let t = TargetSpec::Internal { source: 0 };
        let ns = tiny_nuisances();
        let cf = mste_core::estimators::CrossFit::single(&d, t, ns).unwrap();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![0.0], vec![1.0]]);
        for level in 0..2 {
            let dr = mste_core::estimators::estimate_internal_dr(&d, &cf, 1, &spec, level).unwrap();
            let plug =
                mste_core::estimators::estimate_internal_plugin(&d, &cf, 1, &spec, level).unwrap();
            let iptw =
                mste_core::estimators::estimate_internal_iptw(&d, &cf, 1, &spec, level).unwrap();
            assert!((dr.point - plug.point).abs() < 1e-10);
            assert!((dr.point - iptw.point).abs() < 1e-10);
        }
    });
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "C1",
        "oracle equivalence on finite discrete instance",
        status.is_ok() && elapsed < 1.0,
        &format!("runtime {elapsed:.3}s (budget 1s); forms cross-checked in oracle_equivalence.rs"),
    );
}

fn tiny_instance() -> mste_core::data::Dataset {
    use mste_core::data::Observation;
    let mut obs = Vec::new();
    for &(xt, s, a, count) in &[
        (0u8, 0usize, 0usize, 6usize),
        (0, 0, 1, 4),
        (0, 1, 0, 4),
        (0, 1, 1, 6),
        (1, 0, 0, 8),
        (1, 0, 1, 4),
        (1, 1, 0, 4),
        (1, 1, 1, 8),
    ] {
        let m = 2.0 + xt as f64 + 3.0 * a as f64;
        for k in 0..count {
            let y = if k % 2 == 0 { m + 0.5 } else { m - 0.5 };
            obs.push(Observation {
                y: Some(y),
                a: Some(a),
                s: Some(s),
                r: true,
                x: vec![xt as f64],
            });
        }
    }
    mste_core::data::Dataset::new(
        obs,
        vec!["xt".into()],
        vec!["0".into(), "1".into()],
        vec!["1".into(), "2".into()],
    )
    .unwrap()
    .validate()
    .unwrap()
}

fn tiny_nuisances() -> mste_core::nuisance::NuisanceSet {
    // empirical tables of tiny_instance
    let n_x = [22.0, 24.0]; // per xt
    let n_xa = [[10.0, 10.0], [12.0, 12.0]]; // [xt][a]
    let n_xs = [[10.0, 12.0], [12.0, 12.0]]; // [xt][s]
    mste_core::nuisance::NuisanceSet::from_functions(
        Arc::new(|a: usize, x: &[f64]| 2.0 + x[0] + 3.0 * a as f64),
        Arc::new(move |a: usize, x: &[f64]| n_xa[x[0] as usize][a] / n_x[x[0] as usize]),
        Arc::new(move |s: usize, x: &[f64]| n_xs[x[0] as usize][s] / n_x[x[0] as usize]),
        None,
        0.01,
        0,
    )
}

// ---------------------------------------------------------------------
// Criterion 2: IF-mean-zero and aggregation identities on estimation runs,
// including a run that goes through the CSV pipeline.
// ---------------------------------------------------------------------
#[test]
fn c2_identities_on_estimation_runs() {
    let dgp = MainDgp::new(DgpMainConfig::new(4000, 1200)).unwrap();
    let d = dgp.generate(derive_seed(SEED, 2));

    // through the CSV pipeline (real-CSV run)
    let dir = std::env::temp_dir().join(format!("mste-acc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("c2.csv");
    let mut out = String::from("y,a,s,r");
    for name in d.covariate_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..d.len() {
        let y = d.y(i).map_or(String::new(), |v| format!("{v:.17}"));
        let a = d.a(i).map_or(String::new(), |v| v.to_string());
        let s = d
            .s(i)
            .map_or(String::new(), |v| d.source_labels()[v].clone());
        out.push_str(&format!("{y},{a},{s},{}", u8::from(d.r(i))));
        for v in d.x(i) {
            out.push_str(&format!(",{v:.17}"));
        }
        out.push('\n');
    }
    std::fs::write(&path, out).unwrap();
    let d2 = read_csv(&path, &CsvColumns::default()).unwrap().validate().unwrap();

    let mut worst_if: f64 = 0.0;
    let mut worst_agg: f64 = 0.0;
    for (data, target) in [
        (&d, TargetSpec::Internal { source: 0 }),
        (&d2, TargetSpec::Internal { source: 0 }),
        (&d2, TargetSpec::External),
    ] {
        let nspec = NuisanceSpec {
            outcome_model: mste_core::nuisance::OutcomeModelKind::Linear,
            ..NuisanceSpec::default()
        };
        let cf = cross_fit(data, &nspec, target, 2, SEED).unwrap();
        let spec = SubgroupSpec::enumerate(data, vec![0], target).unwrap();
        let ev = CellEvaluator::new(data, &cf, 1).unwrap();
        let overall_spec = SubgroupSpec::declared(vec![], vec![vec![]]);
        let overall = ev.estimate(Method::Dr, &overall_spec, 0).unwrap();
        for fold in 0..cf.k {
            let mut agg = 0.0;
            let mut n_t = 0usize;
            let mut parts = Vec::new();
            for level in 0..spec.levels.len() {
                let est = ev.estimate(Method::Dr, &spec, level).unwrap();
                let ifs = est.if_values.as_ref().unwrap();
                let mean: f64 = ifs.iter().sum::<f64>() / ifs.len() as f64;
                worst_if = worst_if.max(mean.abs());
                parts.push((est.fold_cell_counts[fold], est.fold_points[fold]));
                n_t += est.fold_cell_counts[fold];
            }
            for (count, point) in parts {
                agg += count as f64 / n_t as f64 * point;
            }
            worst_agg = worst_agg.max((agg - overall.fold_points[fold]).abs());
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    report(
        "C2",
        "IF-mean-zero and aggregation identities",
        worst_if < 1e-10 && worst_agg < 1e-10,
        &format!("max |IF mean| {worst_if:.2e}, max aggregation gap {worst_agg:.2e} (tol 1e-10)"),
    );
}

// ---------------------------------------------------------------------
// Criterion 3: Table reproduction for the internal target at desk scale.
// ---------------------------------------------------------------------
#[test]
fn c3_internal_table_reproduction() {
    let start = Instant::now();
    for (n_ms, dr_sd_target, iptw_sd_target, reg_bias_target, iptw_bias_target, dr_none_target) in
        [(1000usize, 0.62, 0.97, 0.14, 0.14, 0.11), (5000, 0.28, 0.44, 0.11, 0.09, 0.09)]
    {
        let mut opts = MainOptions::table_defaults(10_000, n_ms, false);
        opts.seed = derive_seed(SEED, 3 + n_ms as u64);
        let result = run_main_experiment(&opts).unwrap();
        let c = |block: &str, method: Method| cell(&result.cells, block, method, 3);

        // DR bias ~ 0 in the three blocks with a correct model group
        for block in ["both", "outcome", "weights"] {
            let bias = c(block, Method::Dr).mean_bias;
            report(
                "C3",
                &format!("DR bias, block {block}, n_ms {n_ms}"),
                bias.abs() <= 0.10,
                &format!("bias {bias:.3} (tol +-0.10)"),
            );
        }
        // DR bias under full misspecification tracks the reported value
        let bias_none = c("none", Method::Dr).mean_bias;
        report(
            "C3",
            &format!("DR bias magnitude, block none, n_ms {n_ms}"),
            (bias_none.abs() - dr_none_target).abs() <= 0.10,
            &format!("|bias| {:.3} vs {dr_none_target} (tol +-0.10)", bias_none.abs()),
        );
        // Regression bias under outcome misspecification
        for block in ["weights", "none"] {
            let bias = c(block, Method::PlugIn).mean_bias;
            report(
                "C3",
                &format!("Regression bias, block {block}, n_ms {n_ms}"),
                (bias - reg_bias_target).abs() <= 0.06,
                &format!("bias {bias:.3} vs {reg_bias_target} (tol +-0.06)"),
            );
        }
        // IPTW bias under weight misspecification
        for block in ["outcome", "none"] {
            let bias = c(block, Method::Iptw).mean_bias;
            report(
                "C3",
                &format!("IPTW bias, block {block}, n_ms {n_ms}"),
                (bias - iptw_bias_target).abs() <= 0.06,
                &format!("bias {bias:.3} vs {iptw_bias_target} (tol +-0.06)"),
            );
        }
        // MC SDs
        let dr_sd = c("both", Method::Dr).mc_sd;
        report(
            "C3",
            &format!("DR MC-SD, n_ms {n_ms}"),
            (dr_sd - dr_sd_target).abs() <= 0.25 * dr_sd_target,
            &format!("sd {dr_sd:.3} vs {dr_sd_target} (tol 25%)"),
        );
        let iptw_sd = c("both", Method::Iptw).mc_sd;
        report(
            "C3",
            &format!("IPTW MC-SD, n_ms {n_ms}"),
            (iptw_sd - iptw_sd_target).abs() <= 0.25 * iptw_sd_target,
            &format!("sd {iptw_sd:.3} vs {iptw_sd_target} (tol 25%)"),
        );
        // double robustness at n=5000: |bias| < 3 MCSE in correct blocks;
        // single robustness: misspecified comparators stay biased
        if n_ms == 5000 {
            for block in ["both", "outcome", "weights"] {
                let mc = c(block, Method::Dr);
                let mcse = mc.mc_sd / (mc.reps as f64).sqrt();
                report(
                    "C3",
                    &format!("double robustness (3 MCSE), block {block}"),
                    mc.mean_bias.abs() < 3.0 * mcse,
                    &format!("bias {:.4} vs 3*MCSE {:.4}", mc.mean_bias, 3.0 * mcse),
                );
            }
            let reg_bias = c("none", Method::PlugIn).mean_bias.abs();
            let iptw_bias = c("none", Method::Iptw).mean_bias.abs();
            report(
                "C3",
                "single robustness of comparators at n=5000",
                reg_bias > 0.05 && iptw_bias > 0.05,
                &format!("|reg bias| {reg_bias:.3}, |iptw bias| {iptw_bias:.3} (> 0.05)"),
            );
        }
    }
    println!("C3 runtime {:.0}s", start.elapsed().as_secs_f64());
}

// ---------------------------------------------------------------------
// Criterion 4: external-target table at n = 1e4, multi-source 1000.
// ---------------------------------------------------------------------
#[test]
fn c4_external_table_reproduction() {
    let start = Instant::now();
    let mut opts = MainOptions::table_defaults(10_000, 1000, true);
    opts.seed = derive_seed(SEED, 4);
    let result = run_main_experiment(&opts).unwrap();
    let dr = cell(&result.cells, "both", Method::Dr, 3);
    report(
        "C4",
        "external DR bias",
        (dr.mean_bias - (-0.01)).abs() <= 0.10,
        &format!("bias {:.3} vs -0.01 (tol +-0.10)", dr.mean_bias),
    );
    let iptw = cell(&result.cells, "both", Method::Iptw, 3);
    report(
        "C4",
        "external IPTW MC-SD",
        (iptw.mc_sd - 1.45).abs() <= 0.30 * 1.45,
        &format!("sd {:.3} vs 1.45 (tol 30%)", iptw.mc_sd),
    );
    // the 10% configuration demonstrates the small-multi-source claim;
    // n = 1e5 (the 1% configuration) is the long-running variant behind
    // the CLI's --full flag
    report(
        "C4",
        "multi-source fraction",
        result.n_multisource * 10 == result.n_total,
        &format!("{} of {}", result.n_multisource, result.n_total),
    );
    println!("C4 runtime {:.0}s", start.elapsed().as_secs_f64());
}

// ---------------------------------------------------------------------
// Criterion 5: per-subgroup bias, SE calibration, and coverage with
// simультaneous bands.
// ---------------------------------------------------------------------
#[test]
fn c5_per_subgroup_calibration_and_coverage() {
    let start = Instant::now();
    let mut opts = MainOptions::table_defaults(10_000, 1000, false);
    opts.seed = derive_seed(SEED, 5);
    opts.methods = vec![Method::Dr];
    opts.blocks = vec![mste_core::sim::Correctness {
        outcome: true,
        weights: true,
    }];
    opts.gaussian_band_draws = 200_000;
    opts.bootstrap_band_reps = 200;
    opts.bootstrap_b = 500;
    opts.bootstrap_refit = false;
    let result = run_main_experiment(&opts).unwrap();
    for level in 1..=5usize {
        let c = cell(&result.cells, "both", Method::Dr, level);
        report(
            "C5",
            &format!("bias, level {level}"),
            c.mean_bias.abs() < 0.1,
            &format!("bias {:.3} (tol 0.1)", c.mean_bias),
        );
        let se = c.mean_se.unwrap();
        report(
            "C5",
            &format!("IF-based SE vs MC-SD, level {level}"),
            (se - c.mc_sd).abs() <= 0.10 * c.mc_sd,
            &format!("mean SE {se:.3} vs MC-SD {:.3} (tol 10%)", c.mc_sd),
        );
        let cover = c.pointwise_coverage.unwrap();
        report(
            "C5",
            &format!("pointwise coverage, level {level}"),
            (0.92..=0.98).contains(&cover),
            &format!("coverage {cover:.3} (band [0.92, 0.98])"),
        );
        let band_g = c.band_coverage_gaussian.unwrap();
        report(
            "C5",
            &format!("simultaneous >= pointwise (gaussian), level {level}"),
            band_g >= cover,
            &format!("band {band_g:.3} vs pointwise {cover:.3}"),
        );
        let band_b = c.band_coverage_bootstrap.unwrap();
        let ci_b = c.pointwise_coverage_bootstrap_reps.unwrap();
        report(
            "C5",
            &format!("simultaneous >= pointwise (bootstrap, {} reps), level {level}", c.bootstrap_scored_reps),
            band_b >= ci_b && c.bootstrap_scored_reps >= 200,
            &format!("band {band_b:.3} vs pointwise {ci_b:.3}"),
        );
    }
    println!("C5 runtime {:.0}s", start.elapsed().as_secs_f64());
}

// ---------------------------------------------------------------------
// Criterion 6: rate robustness.
// ---------------------------------------------------------------------
#[test]
fn c6_rate_robustness() {
    let start = Instant::now();
    let opts = RateOptions {
        seed: derive_seed(SEED, 6),
        ..RateOptions::default()
    };
    let cells = run_rate_experiment(&opts).unwrap();
    for &n in &[100usize, 500, 1000] {
        let dr: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.n == n && c.method == Method::Dr)
            .map(|c| (c.r, c.rmse))
            .collect();
        let plug: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.n == n && c.method == Method::PlugIn)
            .map(|c| (c.r, c.rmse))
            .collect();
        let dr_at = |r: f64| dr.iter().find(|(rr, _)| (rr - r).abs() < 1e-9).unwrap().1;
        let ref_rmse = dr_at(0.5);
        let mut flat = true;
        let mut worst = 0.0f64;
        for &(r, rmse) in &dr {
            if r >= 0.25 - 1e-9 {
                let rel = (rmse - ref_rmse).abs() / ref_rmse;
                worst = worst.max(rel);
                if rel > 0.15 {
                    flat = false;
                }
            }
        }
        report(
            "C6",
            &format!("DR RMSE flat for r >= 0.25, n {n}"),
            flat,
            &format!("max relative gap {worst:.3} vs r=0.5 (tol 0.15)"),
        );
        // plug-in RMSE strictly decreasing in r: Spearman < -0.9
        let spearman = spearman(&plug);
        report(
            "C6",
            &format!("plug-in RMSE decreasing, n {n}"),
            spearman < -0.9,
            &format!("Spearman {spearman:.3} (< -0.9)"),
        );
        let mut dominated = true;
        for &(r, rmse) in &dr {
            if r <= 0.25 + 1e-9 {
                let p = plug.iter().find(|(rr, _)| (rr - r).abs() < 1e-9).unwrap().1;
                if rmse > p {
                    dominated = false;
                }
            }
        }
        report(
            "C6",
            &format!("DR <= plug-in for r <= 0.25, n {n}"),
            dominated,
            "per-r comparison",
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "C6",
        "runtime",
        elapsed < 600.0,
        &format!("{elapsed:.0}s (budget 600s)"),
    );
}

fn spearman(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let rank = |vals: Vec<f64>| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let mut out = vec![0.0; vals.len()];
        for (r, &i) in idx.iter().enumerate() {
            out[i] = r as f64;
        }
        out
    };
    let rx = rank(pairs.iter().map(|p| p.0).collect());
    let ry = rank(pairs.iter().map(|p| p.1).collect());
    let d2: f64 = rx.iter().zip(ry.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

// ---------------------------------------------------------------------
// Criterion 7: band construction cross-check.
// ---------------------------------------------------------------------
#[test]
fn c7_band_cross_check() {
    let start = Instant::now();
    // Gaussian-max critical at d=5 vs the analytic oracle
    let points = [0.0; 5];
    let ses = [1.0; 5];
    let band = band_gaussian_max_from(
        &points,
        &ses,
        (1..=5).map(|l| vec![l as f64]).collect(),
        0.05,
        1_000_000,
        derive_seed(SEED, 7),
    )
    .unwrap();
    let oracle = normal_quantile((1.0 + 0.95f64.powf(0.2)) / 2.0);
    report(
        "C7",
        "GaussianMax critical vs analytic oracle (d=5)",
        (band.critical - oracle).abs() <= 0.01,
        &format!("critical {:.4} vs {:.4} (tol 0.01)", band.critical, oracle),
    );

    // bootstrap t-max vs gaussian-max at n_ms = 5000 on the main DGP
    let dgp = MainDgp::new(DgpMainConfig::new(10_000, 5000)).unwrap();
    let d = dgp.generate(derive_seed(SEED, 71));
    let target = TargetSpec::Internal { source: 0 };
    let spec = SubgroupSpec {
        columns: vec![0],
        levels: (1..=5).map(|l| vec![l as f64]).collect(),
        exhaustive: true,
    };
    let nspec = NuisanceSpec::default();
    let cf = cross_fit(&d, &nspec, target, 2, derive_seed(SEED, 72)).unwrap();
    let (points, ses) = estimand_points(&d, &cf, Estimand::Mean(1), &spec).unwrap();
    let opts = BootstrapOptions {
        b: 2000,
        refit: false,
        folds: 2,
        seed: derive_seed(SEED, 73),
        max_redraws: 10,
    };
    let t_max = bootstrap_t_max(
        &d,
        &nspec,
        &cf,
        Estimand::Mean(1),
        &spec,
        &points,
        &ses,
        &opts,
    )
    .unwrap();
    let critical_boot = upper_quantile(&t_max, 0.05);
    report(
        "C7",
        "BootstrapTMax vs GaussianMax criticals at n_ms=5000",
        (critical_boot - band.critical).abs() <= 0.15,
        &format!(
            "bootstrap {critical_boot:.3} vs gaussian {:.3} (tol 0.15)",
            band.critical
        ),
    );
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "C7",
        "runtime",
        elapsed < 900.0,
        &format!("{elapsed:.0}s (budget 900s)"),
    );
}

// ---------------------------------------------------------------------
// Criterion 8: numerical hygiene.
// ---------------------------------------------------------------------
#[test]
fn c8_numerical_hygiene() {
    let start = Instant::now();
    // IRLS score at convergence on 100 random problems
    let mut worst_score: f64 = 0.0;
    for k in 0..100u64 {
        let mut rng = substream(derive_seed(SEED, 800 + k), 0);
        let n = 200 + (k as usize % 5) * 100;
        let d = 2 + (k as usize % 4);
        let mut x = DMatrix::zeros(n, d);
        let beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..d {
                x[(i, j)] = StandardNormal.sample(&mut rng);
            }
            let z: f64 = (0..d).map(|j| x[(i, j)] * beta[j]).sum();
            y.push(f64::from(rng.gen::<f64>() < mste_core::stats::expit(z)));
        }
        let fit = fit_logistic(&x, &y, 0.0).unwrap();
        worst_score = worst_score.max(fit.max_score);
    }
    report(
        "C8",
        "IRLS score at convergence (100 problems)",
        worst_score < 1e-8,
        &format!("max score {worst_score:.2e} (tol 1e-8)"),
    );

    // spline penalized-objective gradient vs central finite differences
    let mut worst_rel: f64 = 0.0;
    for k in 0..20u64 {
        let mut rng = substream(derive_seed(SEED, 900 + k), 0);
        let n = 150;
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.0..1.0)])
            .collect();
        let d = continuous_dataset(&xs);
        let y: Vec<f64> = xs
            .iter()
            .map(|x| {
                (x[0] * (1.0 + k as f64 / 10.0)).sin() + x[1] * x[1]
                    + 0.3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            })
            .collect();
        let fit = fit_spline_additive(
            &d,
            &(0..n).collect::<Vec<_>>(),
            &[0, 1],
            &y,
            &SplineOptions::default(),
        )
        .unwrap();
        let problem = &fit.problem;
        // generic evaluation point away from the optimum
        let mut beta = DVector::zeros(problem.x.ncols());
        for j in 0..beta.len() {
            beta[j] = 0.3 * ((j % 5) as f64 - 2.0) + rng.gen_range(-0.1..0.1);
        }
        let analytic = problem.gradient(&beta);
        let h = 1e-5;
        for j in 0..beta.len() {
            let mut up = beta.clone();
            up[j] += h;
            let mut down = beta.clone();
            down[j] -= h;
            let fd = (problem.objective(&up) - problem.objective(&down)) / (2.0 * h);
            let denom = analytic[j].abs().max(1.0);
            worst_rel = worst_rel.max((fd - analytic[j]).abs() / denom);
        }
    }
    report(
        "C8",
        "spline objective gradient vs finite differences (20 problems)",
        worst_rel < 1e-4,
        &format!("max relative error {worst_rel:.2e} (tol 1e-4)"),
    );
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "C8",
        "runtime",
        elapsed < 60.0,
        &format!("{elapsed:.0}s (budget 60s)"),
    );
}

fn continuous_dataset(xs: &[Vec<f64>]) -> mste_core::data::Dataset {
    use mste_core::data::{CovariateKind, Observation};
    let obs: Vec<Observation> = xs
        .iter()
        .map(|x| Observation {
            y: Some(0.0),
            a: Some(0),
            s: Some(0),
            r: true,
            x: x.clone(),
        })
        .collect();
    let p = xs[0].len();
    let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
    let mut d =
        mste_core::data::Dataset::new(obs, names, vec!["0".into()], vec!["1".into()]).unwrap();
    d.set_covariate_kinds(vec![CovariateKind::Continuous; p])
        .unwrap();
    d.validate().unwrap()
}
