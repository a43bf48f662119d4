//! Dev probe: fitted estimator SDs at level 3 as a function of the fixed
//! outcome-GAM smoothing parameter.

use mste_core::data::{SubgroupSpec, TargetSpec};
use mste_core::estimators::{cross_fit, CellEvaluator, Method};
use mste_core::nuisance::{NuisanceSpec, SplineOptionsConfig};
use mste_core::sim::{DgpMainConfig, MainDgp};
use mste_core::stats::{derive_seed, mean, variance};

fn main() {
    let reps: usize = std::env::args().nth(1).map_or(60, |v| v.parse().unwrap());
    let n_ms: usize = std::env::args().nth(2).map_or(1000, |v| v.parse().unwrap());
    let dgp = MainDgp::new(DgpMainConfig::new(10_000, n_ms)).unwrap();
    let target = TargetSpec::Internal { source: 0 };
    let spec = SubgroupSpec {
        columns: vec![0],
        levels: vec![vec![3.0]],
        exhaustive: false,
    };
    let truth = dgp.truth(target, 1, 3, 1_000_000, 1).0;
    println!("truth {truth:.4}  (n_ms = {n_ms}, reps = {reps})");
    println!("{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "lambda", "dr_bias", "dr_sd", "dr_se", "plug_sd", "iptw_b", "iptw_sd", "cover");

    for lam in [None, Some(1e-2), Some(3e-2), Some(1e-1), Some(3e-1), Some(1.0)] {
        let nspec = NuisanceSpec {
            spline: SplineOptionsConfig {
                fixed_lambda: lam,
                ..SplineOptionsConfig::default()
            },
            ..NuisanceSpec::default()
        };
        let mut dr = Vec::new();
        let mut ses = Vec::new();
        let mut plug = Vec::new();
        let mut iptw = Vec::new();
        let mut cover = 0.0;
        for rep in 0..reps {
            let seed = derive_seed(1234, rep as u64);
            let d = dgp.generate(seed);
            let cf = cross_fit(&d, &nspec, target, 2, seed).unwrap();
            let ev = CellEvaluator::new(&d, &cf, 1).unwrap();
            let e = ev.estimate(Method::Dr, &spec, 0).unwrap();
            dr.push(e.point);
            let se = e.se.unwrap();
            ses.push(se);
            if (e.point - 1.96 * se..=e.point + 1.96 * se).contains(&truth) {
                cover += 1.0;
            }
            plug.push(ev.estimate(Method::PlugIn, &spec, 0).unwrap().point);
            iptw.push(ev.estimate(Method::Iptw, &spec, 0).unwrap().point);
        }
        println!(
            "{:<10} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            lam.map_or("gcv".into(), |l| format!("{l:.0e}")),
            mean(&dr) - truth,
            variance(&dr).sqrt(),
            mean(&ses),
            variance(&plug).sqrt(),
            mean(&iptw) - truth,
            variance(&iptw).sqrt(),
            cover / reps as f64
        );
    }
}
