//! Dev probe: fitted-pipeline search over treatment-model configurations,
//! reporting correct-model and misspecified-model behavior at level 3.

use mste_core::data::{SubgroupSpec, TargetSpec};
use mste_core::estimators::{cross_fit, CellEvaluator, Method};
use mste_core::nuisance::NuisanceSpec;
use mste_core::sim::{DgpMainConfig, MainDgp};
use mste_core::stats::{derive_seed, mean, variance};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

fn main() {
    let reps: usize = std::env::args().nth(1).map_or(50, |v| v.parse().unwrap());
    let base = DgpMainConfig::new(10_000, 1000);
    let base_dgp = MainDgp::new(base.clone()).unwrap();
    let target = TargetSpec::Internal { source: 0 };
    let truth = base_dgp.truth(target, 1, 3, 1_000_000, 1).0;
    eprintln!("truth {truth:.4}");
    println!(
        "int0,int1,int2,range,pats,dr_b,dr_sd,dr_se,reg_b,reg_sd,ipw_b,ipw_sd,mreg_b,mipw_b,fail"
    );

    let intercepts: Vec<[f64; 3]> = vec![
        [-1.0, 0.25, 1.0],
        [-0.75, 0.0, 0.75],
        [-1.0, 0.0, 1.0],
        [-1.25, 0.25, 1.25],
    ];
    let ranges = [0.75, 1.0];
    let patsets: Vec<[&str; 3]> = vec![
        ["desc", "desc", "desc"],
        ["desc", "desc", "asc"],
        ["desc", "asc", "asc"],
    ];

    for ints in &intercepts {
        for &r in &ranges {
            for pats in &patsets {
                let mut dgp = base_dgp.clone();
                for s in 0..3 {
                    let mut v = linspace(-r, r, 10);
                    if pats[s] == "desc" {
                        v.reverse();
                    }
                    dgp.cfg.alpha[s][0] = ints[s];
                    dgp.cfg.alpha[s][1] = 0.056 * r / 0.5;
                    for j in 0..9 {
                        dgp.cfg.alpha[s][2 + j] = v[if j < 4 { j } else { j + 1 }];
                    }
                }
                evaluate(&dgp, truth, reps, ints, r, &pats.join(""));
            }
        }
    }
}

fn evaluate(dgp: &MainDgp, truth: f64, reps: usize, ints: &[f64; 3], r: f64, pats: &str) {
    let target = TargetSpec::Internal { source: 0 };
    let spec = SubgroupSpec {
        columns: vec![0],
        levels: vec![vec![3.0]],
        exhaustive: false,
    };
    let correct = NuisanceSpec::default();
    let keep = vec![0usize, 1, 2, 3];
    let wrong_outcome = NuisanceSpec::misspecified_outcome(keep.clone());
    let wrong_weights = NuisanceSpec::misspecified_weights(keep);

    let mut dr = Vec::new();
    let mut ses = Vec::new();
    let mut reg = Vec::new();
    let mut ipw = Vec::new();
    let mut mreg = Vec::new();
    let mut mipw = Vec::new();
    let mut fail = 0usize;
    for rep in 0..reps {
        let seed = derive_seed(555, rep as u64);
        let d = dgp.generate(seed);
        let run = || -> mste_core::Result<(f64, f64, f64, f64, f64, f64)> {
            let cf = cross_fit(&d, &correct, target, 2, seed)?;
            let ev = CellEvaluator::new(&d, &cf, 1)?;
            let e = ev.estimate(Method::Dr, &spec, 0)?;
            let p = ev.estimate(Method::PlugIn, &spec, 0)?.point;
            let w = ev.estimate(Method::Iptw, &spec, 0)?.point;
            let cf_o = cross_fit(&d, &wrong_outcome, target, 2, seed)?;
            let mp = CellEvaluator::new(&d, &cf_o, 1)?
                .estimate(Method::PlugIn, &spec, 0)?
                .point;
            let cf_w = cross_fit(&d, &wrong_weights, target, 2, seed)?;
            let mw = CellEvaluator::new(&d, &cf_w, 1)?
                .estimate(Method::Iptw, &spec, 0)?
                .point;
            Ok((e.point, e.se.unwrap(), p, w, mp, mw))
        };
        match run() {
            Ok((a, se, b, c, dd, e)) => {
                dr.push(a);
                ses.push(se);
                reg.push(b);
                ipw.push(c);
                mreg.push(dd);
                mipw.push(e);
            }
            Err(_) => fail += 1,
        }
    }
    if dr.len() < 10 {
        println!(
            "{},{},{},{:.1},{pats},,,,,,,,,,{fail}",
            ints[0], ints[1], ints[2], r
        );
        return;
    }
    println!(
        "{},{},{},{:.1},{pats},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{fail}",
        ints[0],
        ints[1],
        ints[2],
        r,
        mean(&dr) - truth,
        variance(&dr).sqrt(),
        mean(&ses),
        mean(&reg) - truth,
        variance(&reg).sqrt(),
        mean(&ipw) - truth,
        variance(&ipw).sqrt(),
        mean(&mreg) - truth,
        mean(&mipw) - truth,
    );
}
