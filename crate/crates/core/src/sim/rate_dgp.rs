//! Two-source data-generating process for the rate-robustness experiment,
//! with closed-form oracle nuisance functions. The per-source treatment
//! probabilities are clipped into [0.1, 0.9] and the outcome mean is
//! m(X, A) = 5.2 + (1.2 - 0.6 X0) A + X0 - 1.2 X1.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CovariateKind, Dataset, Observation};
use crate::nuisance::NuisanceSet;
use crate::stats::{expit, substream};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpRateConfig {
    pub n: usize,
}

pub fn source1_prob(x: &[f64]) -> f64 {
    expit(-0.2 + 0.5 * x[0] + 1.2 * x[1])
}

/// Pr(A=1 | X, S=s), clipped into [0.1, 0.9]; s is the source index (0, 1).
pub fn treatment_prob(s: usize, x: &[f64]) -> f64 {
    let lp = if s == 0 {
        0.8 + 0.9 * x[0] - 0.8 * x[1]
    } else {
        -0.8 - 0.9 * x[0] + 0.8 * x[1]
    };
    expit(lp).clamp(0.1, 0.9)
}

pub fn outcome_mean(x: &[f64], a: usize) -> f64 {
    5.2 + (1.2 - 0.6 * x[0]) * a as f64 + x[0] - 1.2 * x[1]
}

/// Generate a two-source dataset of size `cfg.n`.
pub fn generate_rate(cfg: &DgpRateConfig, seed: u64) -> Dataset {
    let mut rng = substream(seed, 3);
    let mut observations = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x0 = f64::from(rng.gen::<f64>() < 0.5);
        let x1: f64 = rng.gen();
        let x = [x0, x1];
        let s = usize::from(rng.gen::<f64>() >= source1_prob(&x));
        let a = usize::from(rng.gen::<f64>() < treatment_prob(s, &x));
        let eps: f64 = StandardNormal.sample(&mut rng);
        let y = outcome_mean(&x, a) + eps;
        observations.push(Observation {
            y: Some(y),
            a: Some(a),
            s: Some(s),
            r: true,
            x: x.to_vec(),
        });
    }
    let mut d = Dataset::new(
        observations,
        vec!["x0".into(), "x1".into()],
        vec!["0".into(), "1".into()],
        vec!["1".into(), "2".into()],
    )
    .expect("rate observations are consistent");
    d.set_covariate_kinds(vec![
        CovariateKind::Categorical {
            levels: vec![0.0, 1.0],
        },
        CovariateKind::Continuous,
    ])
    .unwrap();
    d.validate().expect("rate data satisfies invariants")
}

/// Oracle nuisance set matching the generating mechanism exactly.
pub fn rate_oracle(trim_epsilon: f64) -> NuisanceSet {
    let mu = Arc::new(|a: usize, x: &[f64]| outcome_mean(x, a))
        as Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;
    let eta = Arc::new(|a: usize, x: &[f64]| {
        let q1 = source1_prob(x);
        let p1 = q1 * treatment_prob(0, x) + (1.0 - q1) * treatment_prob(1, x);
        if a == 1 {
            p1
        } else {
            1.0 - p1
        }
    }) as Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;
    let q = Arc::new(|s: usize, x: &[f64]| {
        let q1 = source1_prob(x);
        if s == 0 {
            q1
        } else {
            1.0 - q1
        }
    }) as Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>;
    NuisanceSet::from_functions(mu, eta, q, None, trim_epsilon, 0)
}

/// phi_{1,1}(X0 = 1) by quadrature: E[m(X,1) | X0=1, S=1] integrates the
/// outcome mean against the density of X1 tilted by Pr(S=1|X).
pub fn rate_truth() -> f64 {
    // Simpson's rule on [0, 1]
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=n {
        let x1 = k as f64 * h;
        let w = source1_prob(&[1.0, x1]);
        let m = outcome_mean(&[1.0, x1], 1);
        let coef = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        num += coef * w * m;
        den += coef * w;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_effect_is_linear_in_x0() {
        for &x0 in &[0.0, 1.0] {
            for k in 0..5 {
                let x = [x0, k as f64 / 4.0];
                let effect = outcome_mean(&x, 1) - outcome_mean(&x, 0);
                assert!((effect - (1.2 - 0.6 * x0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn propensities_respect_clipping() {
        for s in 0..2 {
            for i in 0..=10 {
                for j in 0..=10 {
                    let x = [f64::from(i % 2), j as f64 / 10.0];
                    let p = treatment_prob(s, &x);
                    assert!((0.1..=0.9).contains(&p), "s={s} p={p}");
                }
            }
        }
    }

    #[test]
    fn generation_deterministic() {
        let cfg = DgpRateConfig { n: 500 };
        let d1 = generate_rate(&cfg, 9);
        let d2 = generate_rate(&cfg, 9);
        for i in 0..d1.len() {
            assert_eq!(d1.y(i), d2.y(i));
            assert_eq!(d1.x(i), d2.x(i));
        }
    }

    #[test]
    fn truth_matches_direct_monte_carlo() {
        let truth = rate_truth();
        // crude MC cross-check from generated data: mean of m(X,1) over
        // rows with X0=1, S=1
        let cfg = DgpRateConfig { n: 400_000 };
        let d = generate_rate(&cfg, 123);
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..d.len() {
            if d.x(i)[0] == 1.0 && d.s(i) == Some(0) {
                total += outcome_mean(d.x(i), 1);
                count += 1;
            }
        }
        let mc = total / count as f64;
        assert!((truth - mc).abs() < 0.01, "truth {truth} mc {mc}");
    }
}
