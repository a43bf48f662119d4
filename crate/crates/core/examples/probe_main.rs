//! Dev probe: small Monte Carlo run of the main experiment printing
//! bias/SD at modifier level 3 per correctness block and method.

use std::time::Instant;

use mste_core::sim::{run_main_experiment, MainOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let n_ms: usize = args.next().map_or(1000, |v| v.parse().unwrap());
    let reps: usize = args.next().map_or(100, |v| v.parse().unwrap());
    let external: bool = args.next().map_or(false, |v| v == "external");
    let n_total: usize = args.next().map_or(10_000, |v| v.parse().unwrap());

    let mut opts = MainOptions::table_defaults(n_total, n_ms, external);
    opts.reps = reps;
    opts.truth_draws = 2_000_000;
    let start = Instant::now();
    let result = run_main_experiment(&opts).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "target={} n_total={} n_ms={} reps={} failures={} elapsed={elapsed:.1}s ({:.2}s/rep)",
        result.target,
        result.n_total,
        result.n_multisource,
        opts.reps,
        result.failures,
        elapsed / reps as f64
    );
    println!("truth -> {:?}", result.truth);
    println!("{:<8} {:<8} {:>8} {:>8} {:>8} {:>8}", "block", "method", "bias", "mc_sd", "mean_se", "cover");
    for c in &result.cells {
        if c.level != 3 {
            continue;
        }
        println!(
            "{:<8} {:<8} {:>8.3} {:>8.3} {:>8} {:>8}",
            c.block,
            c.method.to_string(),
            c.mean_bias,
            c.mc_sd,
            c.mean_se.map_or("-".into(), |v| format!("{v:.3}")),
            c.pointwise_coverage.map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
}
