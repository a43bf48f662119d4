//! Dev probe: IPTW bias under oracle vs fitted weights, plus weight
//! calibration diagnostics on one replicate.

use mste_core::data::{SubgroupSpec, TargetSpec};
use mste_core::estimators::{cross_fit, CellEvaluator, CrossFit, Method};
use mste_core::nuisance::NuisanceSpec;
use mste_core::sim::{DgpMainConfig, MainDgp};
use mste_core::stats::derive_seed;

fn main() {
    let reps: usize = std::env::args().nth(1).map_or(100, |v| v.parse().unwrap());
    let dgp = MainDgp::new(DgpMainConfig::new(10_000, 1000)).unwrap();
    let target = TargetSpec::Internal { source: 0 };
    let spec = SubgroupSpec {
        columns: vec![0],
        levels: vec![vec![3.0]],
        exhaustive: false,
    };
    let truth = dgp.truth(target, 1, 3, 2_000_000, 1).0;
    println!("truth {truth:.4}");

    let mut oracle_pts = Vec::new();
    let mut fitted_pts = Vec::new();
    let mut fitted_dr = Vec::new();
    for rep in 0..reps {
        let seed = derive_seed(42, rep as u64);
        let d = dgp.generate(seed);
        let cf = CrossFit::single(&d, target, dgp.oracle(0.01)).unwrap();
        let ev = CellEvaluator::new(&d, &cf, 1).unwrap();
        oracle_pts.push(ev.estimate(Method::Iptw, &spec, 0).unwrap().point);

        let cff = cross_fit(&d, &NuisanceSpec::default(), target, 2, seed).unwrap();
        let evf = CellEvaluator::new(&d, &cff, 1).unwrap();
        fitted_pts.push(evf.estimate(Method::Iptw, &spec, 0).unwrap().point);
        fitted_dr.push(evf.estimate(Method::Dr, &spec, 0).unwrap().point);
    }
    let stat = |pts: &[f64]| {
        let m = mste_core::stats::mean(pts);
        let sd = mste_core::stats::variance(pts).sqrt();
        (m - truth, sd)
    };
    let (b_o, sd_o) = stat(&oracle_pts);
    let (b_f, sd_f) = stat(&fitted_pts);
    let (b_dr, sd_dr) = stat(&fitted_dr);
    println!("oracle iptw: bias {b_o:.3} sd {sd_o:.3}");
    println!("fitted iptw: bias {b_f:.3} sd {sd_f:.3}");
    println!("fitted dr:   bias {b_dr:.3} sd {sd_dr:.3}");

    // weight calibration on one replicate: sum of fitted weights over
    // treated cell rows should approximate the cell count
    let d = dgp.generate(derive_seed(42, 0));
    let cff = cross_fit(&d, &NuisanceSpec::default(), target, 2, 7).unwrap();
    let (mut sum_w_true, mut sum_w_fit, mut n_cell) = (0.0, 0.0, 0usize);
    for (pos, &i) in cff.rows.iter().enumerate() {
        let x = d.x(i);
        if x[0] != 3.0 {
            continue;
        }
        if d.s(i) == Some(0) {
            n_cell += 1;
        }
        if d.a(i) == Some(1) {
            let ns = &cff.nuisances[cff.fold_of[pos]];
            let w_true = dgp.source_probs(x)[0] / dgp.pooled_treatment_prob(x);
            let w_fit = ns.q(0, x) / ns.eta(1, x);
            sum_w_true += w_true;
            sum_w_fit += w_fit;
        }
    }
    println!("cell n {n_cell}; sum w_true {sum_w_true:.1}; sum w_fit {sum_w_fit:.1}");
}
