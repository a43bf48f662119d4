//! The main simulation data-generating process: a five-level categorical
//! effect modifier, nine correlated Gaussian covariates, logistic selection
//! into the multi-source data, multinomial allocation across three sources,
//! per-source logistic treatment assignment, and an additive nonlinear
//! outcome model with treatment interactions.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CovariateKind, Dataset, Observation, TargetSpec};
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::stats::{expit, substream};

pub const N_COVARIATES: usize = 10;
pub const N_SOURCES: usize = 3;
/// Marginal probabilities of the five effect-modifier levels (ratio 1:2:3:2:1).
pub const LEVEL_PROBS: [f64; 5] = [
    1.0 / 9.0,
    2.0 / 9.0,
    3.0 / 9.0,
    2.0 / 9.0,
    1.0 / 9.0,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DgpMainConfig {
    pub n_total: usize,
    pub n_multisource_target: usize,
    /// Target source-size ratio n1:n2:n3.
    pub source_ratio: [f64; N_SOURCES],
    /// Slope shared by all covariates in the participation model.
    pub beta_slope: f64,
    /// Source-model slopes over (X1..X10); intercepts are calibrated.
    pub xi_slopes: [f64; N_COVARIATES],
    pub zeta_slopes: [f64; N_COVARIATES],
    /// Treatment-model coefficients per source: intercept then X1..X10.
    pub alpha: [[f64; N_COVARIATES + 1]; N_SOURCES],
    pub theta: f64,
    /// Interaction of treatment with each effect-modifier level.
    pub vartheta: [f64; 5],
    /// Interaction of treatment with X2..X5.
    pub iota: [f64; 4],
    pub effect_constant: f64,
    pub noise_variance: f64,
}

fn linspace<const N: usize>(lo: f64, hi: f64) -> [f64; N] {
    let mut out = [0.0; N];
    for (k, v) in out.iter_mut().enumerate() {
        *v = lo + (hi - lo) * k as f64 / (N - 1) as f64;
    }
    out
}

fn prepend(intercept: f64, slopes: [f64; N_COVARIATES]) -> [f64; N_COVARIATES + 1] {
    let mut out = [0.0; N_COVARIATES + 1];
    out[0] = intercept;
    out[1..].copy_from_slice(&slopes);
    out
}

impl DgpMainConfig {
    /// Frozen parameter choices. The source-model slopes are the ten values
    /// evenly spaced in [ln 1.1, ln 1.5] (ascending for xi, descending for
    /// zeta). Treatment-model intercepts are (1, -0.25, -1) across sources;
    /// slopes are the ten values evenly spaced in [-1, 1], assigned in
    /// descending order with the wide-range modifier column taking the
    /// middle value, so per-source propensities stay well inside (0, 1)
    /// while the omitted-covariate misspecification still bites.
    pub fn new(n_total: usize, n_multisource_target: usize) -> Self {
        let xi: [f64; N_COVARIATES] = linspace(1.1f64.ln(), 1.5f64.ln());
        let mut zeta = xi;
        zeta.reverse();
        let w: [f64; 10] = linspace(-0.5, 0.5);
        // w = [1.0, 0.778, 0.556, 0.333, 0.111, -0.111, ..., -1.0]
        let slopes = [
            w[4], w[0], w[1], w[2], w[3], w[5], w[6], w[7], w[8], w[9],
        ];
        let alpha = [
            prepend(0.75, slopes),
            prepend(0.0, slopes),
            prepend(-0.75, slopes),
        ];
        DgpMainConfig {
            n_total,
            n_multisource_target,
            source_ratio: [4.0, 2.0, 1.0],
            beta_slope: 1.05f64.ln(),
            xi_slopes: xi,
            zeta_slopes: zeta,
            alpha,
            theta: 0.75,
            vartheta: [0.2, 0.4, -0.5, 0.1, -0.01],
            iota: [0.2, 0.2, -0.2, -0.2],
            effect_constant: 5.0,
            noise_variance: 10.0,
        }
    }
}

pub fn f1(x: f64) -> f64 {
    x.sin() / 5.0
}

pub fn f2(x: f64) -> f64 {
    (-0.25 * x).exp()
}

pub fn f3(x: f64) -> f64 {
    0.02 * x * x + (2.0 + 0.2 * x).powi(2) + 2.0 * (0.015 * x).powi(3)
}

/// Noise-free potential-outcome mean under treatment `a` at covariates `x`
/// (x[0] is the modifier level 1..=5, x[1..10] the Gaussian covariates).
pub fn potential_mean(cfg: &DgpMainConfig, x: &[f64], a: usize) -> f64 {
    let mut m = 1.0 + cfg.effect_constant * a as f64;
    for j in 1..=3 {
        m += f1(cfg.theta * x[j]);
    }
    for j in 4..=6 {
        m += f2(cfg.theta * x[j]);
    }
    for j in 7..=9 {
        m += f3(cfg.theta * x[j]);
    }
    if a == 1 {
        let level = x[0] as usize;
        m += cfg.vartheta[level - 1];
        for (k, iota) in cfg.iota.iter().enumerate() {
            m += iota * x[1 + k];
        }
    }
    m
}

#[inline]
fn dot_covariates(slopes: &[f64; N_COVARIATES], x: &[f64]) -> f64 {
    slopes.iter().zip(x.iter()).map(|(s, v)| s * v).sum()
}

#[inline]
fn alpha_lp(alpha: &[f64; N_COVARIATES + 1], x: &[f64]) -> f64 {
    alpha[0] + alpha[1..].iter().zip(x.iter()).map(|(s, v)| s * v).sum::<f64>()
}

/// Source probabilities given covariates (softmax against source 3).
fn source_probs(cfg: &DgpMainConfig, xi0: f64, zeta0: f64, x: &[f64]) -> [f64; N_SOURCES] {
    let z1 = xi0 + dot_covariates(&cfg.xi_slopes, x);
    let z2 = zeta0 + dot_covariates(&cfg.zeta_slopes, x);
    let zmax = z1.max(z2).max(0.0);
    let e1 = (z1 - zmax).exp();
    let e2 = (z2 - zmax).exp();
    let e3 = (-zmax).exp();
    let total = e1 + e2 + e3;
    [e1 / total, e2 / total, e3 / total]
}

/// Draw the covariate vector: level in {1..5} with the 1:2:3:2:1 law, then
/// nine equicorrelated Gaussians (mean 0.1, variance 0.25, correlation 0.5).
fn draw_covariates<R: Rng>(rng: &mut R, x: &mut [f64; N_COVARIATES]) {
    let u: f64 = rng.gen();
    let mut level = 5usize;
    let mut acc = 0.0;
    for (k, p) in LEVEL_PROBS.iter().enumerate() {
        acc += p;
        if u < acc {
            level = k + 1;
            break;
        }
    }
    x[0] = level as f64;
    let shared: f64 = StandardNormal.sample(rng);
    let scale = 0.125f64.sqrt();
    for slot in x.iter_mut().skip(1) {
        let own: f64 = StandardNormal.sample(rng);
        *slot = 0.1 + scale * (shared + own);
    }
}

/// Calibrate an intercept so that `n_total * E[expit(b0 + lp(X))]` hits
/// `target_count` within 0.1%, by bisection over [-20, 20] against a fixed
/// Monte Carlo sample of linear predictors.
pub fn calibrate_intercept(
    n_total: usize,
    target_count: f64,
    linear_predictors: &[f64],
) -> Result<f64> {
    let achieved = |b0: f64| -> f64 {
        let mean: f64 =
            linear_predictors.iter().map(|lp| expit(b0 + lp)).sum::<f64>() / linear_predictors.len() as f64;
        n_total as f64 * mean
    };
    let (mut lo, mut hi) = (-20.0, 20.0);
    if achieved(lo) > target_count || achieved(hi) < target_count {
        return Err(Error::Unachievable {
            target: target_count,
            lo,
            hi,
        });
    }
    let tol = 0.001 * target_count;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = achieved(mid);
        if (v - target_count).abs() <= tol {
            return Ok(mid);
        }
        if v < target_count {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Main DGP with calibrated intercepts.
#[derive(Debug, Clone)]
pub struct MainDgp {
    pub cfg: DgpMainConfig,
    pub beta0: f64,
    pub xi0: f64,
    pub zeta0: f64,
}

pub const CALIBRATION_DRAWS: usize = 1_000_000;
const CALIBRATION_SEED: u64 = 0x5EED_CA11;

impl MainDgp {
    /// Calibrate beta0 (participation) and (xi0, zeta0) (source allocation)
    /// by Monte Carlo, then freeze them.
    pub fn new(cfg: DgpMainConfig) -> Result<Self> {
        let mut rng = substream(CALIBRATION_SEED, 0);
        let draws = CALIBRATION_DRAWS;
        let mut x = [0.0; N_COVARIATES];
        let mut lp_r = Vec::with_capacity(draws);
        let mut lp_xi = Vec::with_capacity(draws);
        let mut lp_zeta = Vec::with_capacity(draws);
        for _ in 0..draws {
            draw_covariates(&mut rng, &mut x);
            let lp: f64 = x.iter().map(|v| cfg.beta_slope * v).sum();
            lp_r.push(lp);
            lp_xi.push(dot_covariates(&cfg.xi_slopes, &x));
            lp_zeta.push(dot_covariates(&cfg.zeta_slopes, &x));
        }
        let beta0 = calibrate_intercept(cfg.n_total, cfg.n_multisource_target as f64, &lp_r)?;
        // weights proportional to Pr(R=1|X): source ratios hold within the
        // multi-source population
        let weights: Vec<f64> = lp_r.iter().map(|lp| expit(beta0 + lp)).collect();
        let (xi0, zeta0) =
            calibrate_source_intercepts(&cfg.source_ratio, &lp_xi, &lp_zeta, &weights)?;
        Ok(MainDgp {
            cfg,
            beta0,
            xi0,
            zeta0,
        })
    }

    pub fn participation_prob(&self, x: &[f64]) -> f64 {
        let lp: f64 = x.iter().map(|v| self.cfg.beta_slope * v).sum();
        expit(self.beta0 + lp)
    }

    pub fn source_probs(&self, x: &[f64]) -> [f64; N_SOURCES] {
        source_probs(&self.cfg, self.xi0, self.zeta0, x)
    }

    pub fn treatment_prob(&self, s: usize, x: &[f64]) -> f64 {
        expit(alpha_lp(&self.cfg.alpha[s], x))
    }

    /// Pr(A=1|X) pooled over sources within the multi-source population.
    pub fn pooled_treatment_prob(&self, x: &[f64]) -> f64 {
        let qs = self.source_probs(x);
        (0..N_SOURCES).map(|s| qs[s] * self.treatment_prob(s, x)).sum()
    }

    /// Generate one dataset. Deterministic given the seed.
    pub fn generate(&self, seed: u64) -> Dataset {
        let mut rng = substream(seed, 1);
        let cfg = &self.cfg;
        let noise_sd = cfg.noise_variance.sqrt();
        let mut observations = Vec::with_capacity(cfg.n_total);
        let mut x = [0.0; N_COVARIATES];
        for _ in 0..cfg.n_total {
            draw_covariates(&mut rng, &mut x);
            let r = rng.gen::<f64>() < self.participation_prob(&x);
            if !r {
                observations.push(Observation {
                    y: None,
                    a: None,
                    s: None,
                    r: false,
                    x: x.to_vec(),
                });
                continue;
            }
            let qs = self.source_probs(&x);
            let u: f64 = rng.gen();
            let s = if u < qs[0] {
                0
            } else if u < qs[0] + qs[1] {
                1
            } else {
                2
            };
            let a = usize::from(rng.gen::<f64>() < self.treatment_prob(s, &x));
            let eps0: f64 = StandardNormal.sample(&mut rng);
            let eps1: f64 = StandardNormal.sample(&mut rng);
            let y0 = potential_mean(cfg, &x, 0) + noise_sd * eps0;
            let y1 = potential_mean(cfg, &x, 1) + noise_sd * eps1;
            let y = if a == 1 { y1 } else { y0 };
            observations.push(Observation {
                y: Some(y),
                a: Some(a),
                s: Some(s),
                r: true,
                x: x.to_vec(),
            });
        }
        let names = (1..=N_COVARIATES).map(|j| format!("x{j}")).collect();
        let mut kinds = vec![CovariateKind::Continuous; N_COVARIATES];
        kinds[0] = CovariateKind::Categorical {
            levels: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        };
        let mut d = Dataset::new(
            observations,
            names,
            vec!["0".into(), "1".into()],
            vec!["1".into(), "2".into(), "3".into()],
        )
        .expect("generated observations are consistent");
        d.set_covariate_kinds(kinds).unwrap();
        d.validate().expect("generated data satisfies invariants")
    }

    /// Oracle nuisance functions equal to the generating mechanism.
    pub fn oracle(&self, trim_epsilon: f64) -> NuisanceSet {
        let dgp = Arc::new(self.clone());
        let mu = {
            let dgp = dgp.clone();
            Arc::new(move |a: usize, x: &[f64]| potential_mean(&dgp.cfg, x, a))
                as Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>
        };
        let eta = {
            let dgp = dgp.clone();
            Arc::new(move |a: usize, x: &[f64]| {
                let p1 = dgp.pooled_treatment_prob(x);
                if a == 1 {
                    p1
                } else {
                    1.0 - p1
                }
            }) as Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>
        };
        let q = {
            let dgp = dgp.clone();
            Arc::new(move |s: usize, x: &[f64]| dgp.source_probs(x)[s])
                as Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>
        };
        let p = {
            let dgp = dgp.clone();
            Arc::new(move |x: &[f64]| dgp.participation_prob(x))
                as Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>
        };
        NuisanceSet::from_functions(mu, eta, q, Some(p), trim_epsilon, 0)
    }

    /// Monte Carlo integration of E(Y^a | X1 = level, target), excluding
    /// outcome noise analytically. Returns (value, mc_se).
    pub fn truth(
        &self,
        target: TargetSpec,
        a: usize,
        level: usize,
        draws: usize,
        seed: u64,
    ) -> (f64, f64) {
        let table = self.truth_table(draws, seed, &[a], &[level], &[target]);
        table[0]
    }

    /// One streaming pass computing several truth cells at once; entries are
    /// ordered target-major, then treatment, then level.
    pub fn truth_table(
        &self,
        draws: usize,
        seed: u64,
        treatments: &[usize],
        levels: &[usize],
        targets: &[TargetSpec],
    ) -> Vec<(f64, f64)> {
        let cells: Vec<(TargetSpec, usize, usize)> = targets
            .iter()
            .flat_map(|&t| {
                treatments
                    .iter()
                    .flat_map(move |&a| levels.iter().map(move |&l| (t, a, l)))
            })
            .collect();
        let mut sum_w = vec![0.0; cells.len()];
        let mut sum_wm = vec![0.0; cells.len()];
        let mut sum_w2 = vec![0.0; cells.len()];
        let mut sum_w2m = vec![0.0; cells.len()];
        let mut sum_w2m2 = vec![0.0; cells.len()];

        let mut rng = substream(seed, 2);
        let mut x = [0.0; N_COVARIATES];
        for _ in 0..draws {
            draw_covariates(&mut rng, &mut x);
            for (c, &(target, a, level)) in cells.iter().enumerate() {
                x[0] = level as f64;
                let pr = self.participation_prob(&x);
                let w = match target {
                    TargetSpec::Internal { source } => pr * self.source_probs(&x)[source],
                    TargetSpec::External => 1.0 - pr,
                };
                let m = potential_mean(&self.cfg, &x, a);
                sum_w[c] += w;
                sum_wm[c] += w * m;
                sum_w2[c] += w * w;
                sum_w2m[c] += w * w * m;
                sum_w2m2[c] += w * w * m * m;
            }
        }
        cells
            .iter()
            .enumerate()
            .map(|(c, _)| {
                let value = sum_wm[c] / sum_w[c];
                // ratio-estimator SE: sqrt(sum w^2 (m - value)^2) / sum w
                let var_term =
                    sum_w2m2[c] - 2.0 * value * sum_w2m[c] + value * value * sum_w2[c];
                let se = var_term.max(0.0).sqrt() / sum_w[c];
                (value, se)
            })
            .collect()
    }
}

/// Two-dimensional root search for the multinomial intercepts: alternating
/// coordinate bisection until the (weighted) expected source shares match
/// `ratio` within 0.25% absolute each.
pub fn calibrate_source_intercepts(
    ratio: &[f64; N_SOURCES],
    lp_xi: &[f64],
    lp_zeta: &[f64],
    weights: &[f64],
) -> Result<(f64, f64)> {
    let total_ratio: f64 = ratio.iter().sum();
    let target1 = ratio[0] / total_ratio;
    let target2 = ratio[1] / total_ratio;
    let share = |xi0: f64, zeta0: f64, which: usize| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((l1, l2), w) in lp_xi.iter().zip(lp_zeta.iter()).zip(weights.iter()) {
            let z1 = xi0 + l1;
            let z2 = zeta0 + l2;
            let zmax = z1.max(z2).max(0.0);
            let e1 = (z1 - zmax).exp();
            let e2 = (z2 - zmax).exp();
            let e3 = (-zmax).exp();
            let p = if which == 0 {
                e1 / (e1 + e2 + e3)
            } else {
                e2 / (e1 + e2 + e3)
            };
            num += w * p;
            den += w;
        }
        num / den
    };
    let mut xi0 = 0.0;
    let mut zeta0 = 0.0;
    let tol = 5e-4;
    for sweep in 0..50 {
        // share of source 1 is increasing in xi0
        let (mut lo, mut hi) = (-20.0, 20.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if share(mid, zeta0, 0) < target1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        xi0 = 0.5 * (lo + hi);
        let (mut lo, mut hi) = (-20.0, 20.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if share(xi0, mid, 1) < target2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        zeta0 = 0.5 * (lo + hi);
        let r1 = (share(xi0, zeta0, 0) - target1).abs();
        let r2 = (share(xi0, zeta0, 1) - target2).abs();
        if r1 < tol && r2 < tol {
            return Ok((xi0, zeta0));
        }
        if sweep == 49 {
            return Err(Error::NoConvergence {
                sweeps: 50,
                residual: r1.max(r2),
            });
        }
    }
    Ok((xi0, zeta0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_calibration_closed_forms() {
        // slopes all zero: the linear predictors are all zero
        let lps = vec![0.0; 10_000];
        let b0 = calibrate_intercept(1000, 500.0, &lps).unwrap();
        assert!(b0.abs() < 0.01, "beta0 {b0}");
        let target = 1000.0 * expit(1.0);
        let b1 = calibrate_intercept(1000, target, &lps).unwrap();
        assert!((b1 - 1.0).abs() < 0.01, "beta0 {b1}");
    }

    #[test]
    fn intercept_calibration_unachievable() {
        let lps = vec![0.0; 100];
        assert!(matches!(
            calibrate_intercept(1000, 2000.0, &lps),
            Err(Error::Unachievable { .. })
        ));
    }

    #[test]
    fn source_intercepts_closed_form() {
        let zeros = vec![0.0; 20_000];
        let weights = vec![1.0; 20_000];
        let (xi0, zeta0) =
            calibrate_source_intercepts(&[4.0, 2.0, 1.0], &zeros, &zeros, &weights).unwrap();
        assert!((xi0 - 4.0f64.ln()).abs() < 0.01, "xi0 {xi0}");
        assert!((zeta0 - 2.0f64.ln()).abs() < 0.01, "zeta0 {zeta0}");
        // swapped ratio: both intercepts negative, ordered
        let (xi0s, zeta0s) =
            calibrate_source_intercepts(&[1.0, 2.0, 4.0], &zeros, &zeros, &weights).unwrap();
        assert!(xi0s < zeta0s && zeta0s < 0.0, "{xi0s} {zeta0s}");
    }

    #[test]
    fn generation_is_deterministic() {
        let dgp = MainDgp::new(DgpMainConfig::new(2000, 500)).unwrap();
        let d1 = dgp.generate(33);
        let d2 = dgp.generate(33);
        assert_eq!(d1.len(), d2.len());
        for i in 0..d1.len() {
            assert_eq!(d1.y(i), d2.y(i));
            assert_eq!(d1.a(i), d2.a(i));
            assert_eq!(d1.s(i), d2.s(i));
            assert_eq!(d1.x(i), d2.x(i));
        }
    }

    #[test]
    fn modifier_level_three_frequency() {
        let dgp = MainDgp::new(DgpMainConfig::new(1000, 300)).unwrap();
        let mut rng = substream(1, 0);
        let mut x = [0.0; N_COVARIATES];
        let draws = 1_000_000;
        let mut count = 0usize;
        for _ in 0..draws {
            draw_covariates(&mut rng, &mut x);
            if x[0] == 3.0 {
                count += 1;
            }
        }
        let _ = &dgp;
        let freq = count as f64 / draws as f64;
        assert!((freq - 1.0 / 3.0).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn calibrated_counts_hit_targets() {
        let dgp = MainDgp::new(DgpMainConfig::new(10_000, 1000)).unwrap();
        // independent draw
        let mut rng = substream(77, 5);
        let mut x = [0.0; N_COVARIATES];
        let draws = 400_000;
        let mut exp_count = 0.0;
        let mut shares = [0.0; N_SOURCES];
        let mut wtot = 0.0;
        for _ in 0..draws {
            draw_covariates(&mut rng, &mut x);
            let pr = dgp.participation_prob(&x);
            exp_count += pr;
            let qs = dgp.source_probs(&x);
            for (s, q) in qs.iter().enumerate() {
                shares[s] += pr * q;
            }
            wtot += pr;
        }
        let achieved = 10_000.0 * exp_count / draws as f64;
        assert!(
            (990.0..=1010.0).contains(&achieved),
            "expected count {achieved}"
        );
        let targets = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for s in 0..N_SOURCES {
            let share = shares[s] / wtot;
            assert!(
                (share - targets[s]).abs() < 0.005,
                "source {s} share {share}"
            );
        }
    }

    #[test]
    fn homogeneous_effect_when_interactions_vanish() {
        let mut cfg = DgpMainConfig::new(10_000, 1000);
        cfg.vartheta = [0.0; 5];
        cfg.iota = [0.0; 4];
        let x = [3.0, 0.1, 0.2, -0.1, 0.0, 0.3, 0.1, 0.2, -0.2, 0.1];
        let effect = potential_mean(&cfg, &x, 1) - potential_mean(&cfg, &x, 0);
        assert!((effect - 5.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_effect_at_level_three() {
        // E(Y^1 - Y^0 | X1 = 3) = 5 + vartheta_3 + sum_j iota_j E[X_j]
        //                       = 5 - 0.5 + 0 = 4.5 since sum(iota) = 0.
        let cfg = DgpMainConfig::new(10_000, 1000);
        let mut rng = substream(3, 9);
        let mut x = [0.0; N_COVARIATES];
        let draws = 1_000_000;
        let mut total = 0.0;
        for _ in 0..draws {
            draw_covariates(&mut rng, &mut x);
            x[0] = 3.0;
            total += potential_mean(&cfg, &x, 1) - potential_mean(&cfg, &x, 0);
        }
        let effect = total / draws as f64;
        assert!((effect - 4.5).abs() < 0.002, "effect {effect}");
    }

    #[test]
    fn truth_oracle_self_consistent() {
        let dgp = MainDgp::new(DgpMainConfig::new(10_000, 1000)).unwrap();
        let t = TargetSpec::Internal { source: 0 };
        let (v1, se1) = dgp.truth(t, 1, 3, 300_000, 1);
        let (v2, se2) = dgp.truth(t, 1, 3, 300_000, 2);
        let gap = (v1 - v2).abs();
        let budget = 3.0 * (se1 * se1 + se2 * se2).sqrt();
        assert!(gap < budget.max(1e-3), "gap {gap} budget {budget}");
    }
}
