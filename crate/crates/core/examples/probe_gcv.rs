//! Dev probe: GCV smoothing behavior of the outcome GAM on main-DGP data.

use mste_core::data::TargetSpec;
use mste_core::sim::{DgpMainConfig, MainDgp};
use mste_core::spline::{fit_spline_additive, Smoothing, SplineOptions};

fn main() {
    let dgp = MainDgp::new(DgpMainConfig::new(10_000, 1000)).unwrap();
    let d = dgp.generate(5);
    let rows: Vec<usize> = d
        .estimation_indices(TargetSpec::Internal { source: 0 })
        .into_iter()
        .filter(|&i| d.a(i) == Some(1))
        .collect();
    let train: Vec<usize> = rows.iter().cloned().take(rows.len() / 2).collect();
    let y: Vec<f64> = train.iter().map(|&i| d.y(i).unwrap()).collect();
    let columns: Vec<usize> = (0..10).collect();
    println!("treated train rows: {}", train.len());
    for (name, opts) in [
        ("gcv default", SplineOptions::default()),
        (
            "gcv 1 sweep",
            SplineOptions {
                gcv_sweeps: 1,
                ..SplineOptions::default()
            },
        ),
        (
            "fixed 1e-2",
            SplineOptions {
                smoothing: Smoothing::Fixed(1e-2),
                ..SplineOptions::default()
            },
        ),
        (
            "fixed 1.0",
            SplineOptions {
                smoothing: Smoothing::Fixed(1.0),
                ..SplineOptions::default()
            },
        ),
    ] {
        let fit = fit_spline_additive(&d, &train, &columns, &y, &opts).unwrap();
        let diag = &fit.diagnostics;
        println!(
            "{name}: edf {:.1} gcv {:.3} rss/n {:.3} lambdas {:?}",
            diag.edf,
            diag.gcv,
            diag.rss / train.len() as f64,
            diag.lambdas.iter().map(|l| format!("{l:.0e}")).collect::<Vec<_>>()
        );
    }
}
