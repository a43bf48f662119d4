//! The four nuisance functions behind one prediction interface: outcome
//! regression (mu_a / g_a), treatment propensity (eta_a / e_a), source
//! membership (q_s), and multi-source participation (p). Includes the
//! deliberately misspecified variants used in the simulation studies and
//! synthetically perturbed oracles for the rate-robustness experiment.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TargetSpec};
use crate::design::Expansion;
use crate::error::{Error, Result};
use crate::glm::{fit_linear, fit_logistic, fit_multinomial, LogisticFit, MultinomialFit, SEPARATION_RIDGE};
use crate::spline::{fit_spline_additive, AdditiveModel, SplineOptions};
use crate::stats::{expit, logit, splitmix64, u64_to_unit};

/// Minimum training rows per (treatment, fold) cell.
pub const MIN_ARM_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeModelKind {
    SplineAdditive,
    Linear,
    Oracle,
    PerturbedOracle,
}

/// Model family for the probability-valued nuisances. `Logistic` covers the
/// treatment and participation models; the source model uses the multinomial
/// generalization (identical for two classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbModelKind {
    Logistic,
    MultinomialLogistic,
    Oracle,
    PerturbedOracle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceSpec {
    pub outcome_model: OutcomeModelKind,
    pub propensity_model: ProbModelKind,
    pub source_model: ProbModelKind,
    pub participation_model: ProbModelKind,
    /// Covariate columns visible to all nuisance models; None = all.
    pub covariate_subset: Option<Vec<usize>>,
    /// True: outcome regressions are fit separately per treatment arm.
    /// False: one pooled fit with an additive treatment term (the
    /// misspecified variant; Linear only).
    pub include_treatment_interactions: bool,
    pub trim_epsilon: f64,
    /// Ridge penalty for the GLM fits; separation triggers an automatic
    /// retry at 1e-4 with a warning.
    pub ridge: f64,
    pub spline: SplineOptionsConfig,
}

/// Serializable subset of [`SplineOptions`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineOptionsConfig {
    pub n_interior_knots: usize,
    /// None = GCV; Some(lambda) = fixed smoothing.
    pub fixed_lambda: Option<f64>,
    pub gcv_sweeps: usize,
}

impl Default for SplineOptionsConfig {
    fn default() -> Self {
        SplineOptionsConfig {
            n_interior_knots: 5,
            fixed_lambda: None,
            gcv_sweeps: 2,
        }
    }
}

impl SplineOptionsConfig {
    fn to_options(&self) -> SplineOptions {
        SplineOptions {
            n_interior_knots: self.n_interior_knots,
            smoothing: match self.fixed_lambda {
                Some(lam) => crate::spline::Smoothing::Fixed(lam),
                None => crate::spline::Smoothing::Gcv,
            },
            gcv_sweeps: self.gcv_sweeps,
            ..SplineOptions::default()
        }
    }
}

impl Default for NuisanceSpec {
    fn default() -> Self {
        NuisanceSpec {
            outcome_model: OutcomeModelKind::SplineAdditive,
            propensity_model: ProbModelKind::Logistic,
            source_model: ProbModelKind::MultinomialLogistic,
            participation_model: ProbModelKind::Logistic,
            covariate_subset: None,
            include_treatment_interactions: true,
            trim_epsilon: 0.01,
            ridge: 0.0,
            spline: SplineOptionsConfig::default(),
        }
    }
}

impl NuisanceSpec {
    /// Misspecified outcome regression: pooled linear model without
    /// treatment interactions, restricted to `keep` covariates.
    pub fn misspecified_outcome(keep: Vec<usize>) -> Self {
        NuisanceSpec {
            outcome_model: OutcomeModelKind::Linear,
            include_treatment_interactions: false,
            covariate_subset: Some(keep),
            ..NuisanceSpec::default()
        }
    }

    /// Misspecified weight models: correct link forms on a restricted
    /// covariate set.
    pub fn misspecified_weights(keep: Vec<usize>) -> Self {
        NuisanceSpec {
            covariate_subset: Some(keep),
            ..NuisanceSpec::default()
        }
    }
}

type ArmFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;
type UnaryFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Fitted prediction functions for one cross-fitting fold. Outputs of the
/// probability-valued functions are trimmed into
/// `[trim_epsilon, 1 - trim_epsilon]` at evaluation time.
#[derive(Clone)]
pub struct NuisanceSet {
    mu: Arc<ArmFn>,
    eta: Arc<ArmFn>,
    q: Arc<ArmFn>,
    p: Option<Arc<UnaryFn>>,
    pub trim_epsilon: f64,
    pub fold_id: usize,
    pub warnings: Vec<String>,
    /// (model, term, value) triples for coefficient audit export.
    pub coefficient_report: Vec<(String, String, f64)>,
}

impl std::fmt::Debug for NuisanceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NuisanceSet")
            .field("fold_id", &self.fold_id)
            .field("trim_epsilon", &self.trim_epsilon)
            .field("has_p", &self.p.is_some())
            .finish()
    }
}

impl NuisanceSet {
    pub fn from_functions(
        mu: Arc<ArmFn>,
        eta: Arc<ArmFn>,
        q: Arc<ArmFn>,
        p: Option<Arc<UnaryFn>>,
        trim_epsilon: f64,
        fold_id: usize,
    ) -> Self {
        NuisanceSet {
            mu,
            eta,
            q,
            p,
            trim_epsilon,
            fold_id,
            warnings: Vec::new(),
            coefficient_report: Vec::new(),
        }
    }

    /// Outcome regression prediction (mu_a for internal, g_a for external).
    #[inline]
    pub fn mu(&self, a: usize, x: &[f64]) -> f64 {
        (self.mu)(a, x)
    }

    /// Trimmed treatment propensity (eta_a for internal, e_a for external).
    #[inline]
    pub fn eta(&self, a: usize, x: &[f64]) -> f64 {
        self.trim((self.eta)(a, x))
    }

    /// Trimmed source-membership probability.
    #[inline]
    pub fn q(&self, s: usize, x: &[f64]) -> f64 {
        self.trim((self.q)(s, x))
    }

    /// Trimmed participation probability Pr(R=1|X); None when the set was
    /// fit for an internal target.
    #[inline]
    pub fn p(&self, x: &[f64]) -> Option<f64> {
        self.p.as_ref().map(|f| self.trim(f(x)))
    }

    /// Untrimmed source probability, for normalization checks.
    #[inline]
    pub fn q_raw(&self, s: usize, x: &[f64]) -> f64 {
        (self.q)(s, x)
    }

    /// Untrimmed treatment propensity.
    #[inline]
    pub fn eta_raw(&self, a: usize, x: &[f64]) -> f64 {
        (self.eta)(a, x)
    }

    #[inline]
    fn trim(&self, p: f64) -> f64 {
        p.clamp(self.trim_epsilon, 1.0 - self.trim_epsilon)
    }

    /// Replace the outcome regression with the one from `other`, keeping
    /// the weight models. Used to cross correctness combinations in the
    /// simulation studies.
    pub fn with_outcome_from(&self, other: &NuisanceSet) -> NuisanceSet {
        let mut out = self.clone();
        out.mu = other.mu.clone();
        out
    }
}

enum OutcomeModel {
    /// One model per treatment arm.
    PerArm(Vec<ArmModel>),
    /// Pooled fit with additive treatment dummies (arms 1..m-1 get one
    /// dummy each appended after the covariate expansion).
    Pooled {
        expansion: Expansion,
        coef: DVector<f64>,
        n_treatments: usize,
    },
}

enum ArmModel {
    Spline(AdditiveModel),
    Linear { expansion: Expansion, coef: DVector<f64> },
}

impl ArmModel {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            ArmModel::Spline(m) => m.predict(x),
            ArmModel::Linear { expansion, coef } => {
                let row = expansion.row(x);
                row.iter().zip(coef.iter()).map(|(r, c)| r * c).sum()
            }
        }
    }
}

impl OutcomeModel {
    fn predict(&self, a: usize, x: &[f64]) -> f64 {
        match self {
            OutcomeModel::PerArm(models) => models[a].predict(x),
            OutcomeModel::Pooled {
                expansion,
                coef,
                n_treatments,
            } => {
                let row = expansion.row(x);
                let mut z: f64 = row.iter().zip(coef.iter()).map(|(r, c)| r * c).sum();
                // treatment dummies for arms 1..m-1 follow the expansion
                if a > 0 && a < *n_treatments {
                    z += coef[expansion.width() + a - 1];
                }
                z
            }
        }
    }
}

/// Treatment model within one source (or pooled over R=1 rows).
enum TreatModel {
    Binary(LogisticFit),
    Multi(MultinomialFit),
}

impl TreatModel {
    fn prob(&self, a: usize, row: &[f64]) -> f64 {
        match self {
            TreatModel::Binary(fit) => {
                let p1 = fit.predict_row(row);
                if a == 1 {
                    p1
                } else {
                    1.0 - p1
                }
            }
            TreatModel::Multi(fit) => fit.predict_row(row)[a],
        }
    }
}

/// Fit all nuisance models for one fold on `train` rows.
///
/// Internal targets: mu_a on multi-source rows with A=a; eta_a assembled by
/// the decomposition sum_s Pr(A=a|X,S=s) Pr(S=s|X); q_s from a multinomial
/// model. External targets additionally fit p = Pr(R=1|X) on all training
/// rows, with the outcome and treatment models restricted to R=1 rows
/// (g_a and e_a).
pub fn fit_nuisances(
    d: &Dataset,
    spec: &NuisanceSpec,
    target: TargetSpec,
    train: &[usize],
    fold_id: usize,
) -> Result<NuisanceSet> {
    if matches!(
        spec.outcome_model,
        OutcomeModelKind::Oracle | OutcomeModelKind::PerturbedOracle
    ) {
        return Err(Error::InvalidConfig(
            "oracle nuisance sets are constructed by the simulation subsystem, not fitted".into(),
        ));
    }
    let columns: Vec<usize> = spec
        .covariate_subset
        .clone()
        .unwrap_or_else(|| (0..d.p()).collect());
    let mut warnings = Vec::new();
    let mut report = Vec::new();

    let ms_rows: Vec<usize> = train.iter().cloned().filter(|&i| d.r(i)).collect();
    if ms_rows.is_empty() {
        return Err(Error::EmptySource {
            name: "no multi-source rows in training split".into(),
        });
    }
    let n_treat = d.n_treatments();
    let n_sources = d.n_sources();

    // --- outcome regression ---
    let outcome = if spec.include_treatment_interactions {
        let mut models = Vec::with_capacity(n_treat);
        for a in 0..n_treat {
            let rows_a: Vec<usize> = ms_rows
                .iter()
                .cloned()
                .filter(|&i| d.a(i) == Some(a))
                .collect();
            if rows_a.len() < MIN_ARM_ROWS {
                return Err(Error::InsufficientTreatedRows {
                    treatment: d.treatment_labels()[a].clone(),
                    fold: fold_id,
                    count: rows_a.len(),
                    min: MIN_ARM_ROWS,
                });
            }
            let y: Vec<f64> = rows_a.iter().map(|&i| d.y(i).unwrap()).collect();
            let model = match spec.outcome_model {
                OutcomeModelKind::SplineAdditive => {
                    let fit = fit_spline_additive(d, &rows_a, &columns, &y, &spec.spline.to_options())?;
                    ArmModel::Spline(fit.model)
                }
                OutcomeModelKind::Linear => {
                    let expansion = Expansion::from_dataset(d, &columns);
                    let xmat = expansion.matrix(d, &rows_a);
                    let coef = fit_linear(&xmat, &y)?;
                    for (name, c) in expansion
                        .column_names(d.covariate_names())
                        .into_iter()
                        .zip(coef.iter())
                    {
                        report.push((format!("outcome[a={a}]"), name, *c));
                    }
                    ArmModel::Linear { expansion, coef }
                }
                _ => unreachable!(),
            };
            models.push(model);
        }
        OutcomeModel::PerArm(models)
    } else {
        if spec.outcome_model != OutcomeModelKind::Linear {
            return Err(Error::InvalidConfig(
                "pooled outcome fits without treatment interactions support the Linear model only"
                    .into(),
            ));
        }
        for a in 0..n_treat {
            let count = ms_rows.iter().filter(|&&i| d.a(i) == Some(a)).count();
            if count < MIN_ARM_ROWS {
                return Err(Error::InsufficientTreatedRows {
                    treatment: d.treatment_labels()[a].clone(),
                    fold: fold_id,
                    count,
                    min: MIN_ARM_ROWS,
                });
            }
        }
        let expansion = Expansion::from_dataset(d, &columns);
        let width = expansion.width();
        let total = width + n_treat - 1;
        let mut xmat = nalgebra::DMatrix::zeros(ms_rows.len(), total);
        let mut buf = vec![0.0; width];
        let mut y = Vec::with_capacity(ms_rows.len());
        for (ri, &i) in ms_rows.iter().enumerate() {
            expansion.fill_row(d.x(i), &mut buf);
            for (ci, &v) in buf.iter().enumerate() {
                xmat[(ri, ci)] = v;
            }
            let a = d.a(i).unwrap();
            if a > 0 {
                xmat[(ri, width + a - 1)] = 1.0;
            }
            y.push(d.y(i).unwrap());
        }
        let coef = fit_linear(&xmat, &y)?;
        for (name, c) in expansion
            .column_names(d.covariate_names())
            .into_iter()
            .zip(coef.iter())
        {
            report.push(("outcome[pooled]".into(), name, *c));
        }
        OutcomeModel::Pooled {
            expansion,
            coef,
            n_treatments: n_treat,
        }
    };

    // --- per-source treatment models ---
    let expansion = Expansion::from_dataset(d, &columns);
    let mut treat_models: Vec<Option<TreatModel>> = Vec::with_capacity(n_sources);
    for s in 0..n_sources {
        let rows_s: Vec<usize> = ms_rows
            .iter()
            .cloned()
            .filter(|&i| d.s(i) == Some(s))
            .collect();
        if rows_s.is_empty() {
            treat_models.push(None);
            continue;
        }
        let xmat = expansion.matrix(d, &rows_s);
        let model = if n_treat == 2 {
            let labels: Vec<f64> = rows_s
                .iter()
                .map(|&i| if d.a(i) == Some(1) { 1.0 } else { 0.0 })
                .collect();
            let fit = match fit_logistic(&xmat, &labels, spec.ridge) {
                Err(Error::Separation) => {
                    warnings.push(format!(
                        "treatment model for source {} separated; refit with ridge {SEPARATION_RIDGE}",
                        d.source_labels()[s]
                    ));
                    fit_logistic(&xmat, &labels, SEPARATION_RIDGE)?
                }
                other => other?,
            };
            for (name, c) in expansion
                .column_names(d.covariate_names())
                .into_iter()
                .zip(fit.coef.iter())
            {
                report.push((format!("treatment[s={s}]"), name, *c));
            }
            TreatModel::Binary(fit)
        } else {
            let labels: Vec<usize> = rows_s.iter().map(|&i| d.a(i).unwrap()).collect();
            let fit = match fit_multinomial(&xmat, &labels, n_treat, spec.ridge) {
                Err(Error::Separation) => {
                    warnings.push(format!(
                        "treatment model for source {} separated; refit with ridge {SEPARATION_RIDGE}",
                        d.source_labels()[s]
                    ));
                    fit_multinomial(&xmat, &labels, n_treat, SEPARATION_RIDGE)?
                }
                other => other?,
            };
            TreatModel::Multi(fit)
        };
        treat_models.push(Some(model));
    }

    // --- source-membership model ---
    let source_model: Option<MultinomialFit> = if n_sources >= 2 {
        let xmat = expansion.matrix(d, &ms_rows);
        let labels: Vec<usize> = ms_rows.iter().map(|&i| d.s(i).unwrap()).collect();
        let fit = match fit_multinomial(&xmat, &labels, n_sources, spec.ridge) {
            Err(Error::Separation) => {
                warnings.push(format!(
                    "source model separated; refit with ridge {SEPARATION_RIDGE}"
                ));
                fit_multinomial(&xmat, &labels, n_sources, SEPARATION_RIDGE)?
            }
            other => other?,
        };
        for (j, beta) in fit.coef.iter().enumerate() {
            for (name, c) in expansion
                .column_names(d.covariate_names())
                .into_iter()
                .zip(beta.iter())
            {
                report.push((format!("source[class={j}]"), name, *c));
            }
        }
        Some(fit)
    } else {
        None
    };

    // --- participation model (external targets only) ---
    let participation: Option<(Expansion, LogisticFit)> = match target {
        TargetSpec::External => {
            let xmat = expansion.matrix(d, train);
            let labels: Vec<f64> = train
                .iter()
                .map(|&i| if d.r(i) { 1.0 } else { 0.0 })
                .collect();
            let fit = match fit_logistic(&xmat, &labels, spec.ridge) {
                Err(Error::Separation) => {
                    warnings.push(format!(
                        "participation model separated; refit with ridge {SEPARATION_RIDGE}"
                    ));
                    fit_logistic(&xmat, &labels, SEPARATION_RIDGE)?
                }
                other => other?,
            };
            for (name, c) in expansion
                .column_names(d.covariate_names())
                .into_iter()
                .zip(fit.coef.iter())
            {
                report.push(("participation".into(), name, *c));
            }
            Some((expansion.clone(), fit))
        }
        TargetSpec::Internal { .. } => None,
    };

    // --- assemble closures ---
    let outcome = Arc::new(outcome);
    let mu_fn: Arc<ArmFn> = {
        let outcome = outcome.clone();
        Arc::new(move |a, x| outcome.predict(a, x))
    };

    let q_expansion = expansion.clone();
    let source_model = Arc::new(source_model);
    let q_fn: Arc<ArmFn> = {
        let source_model = source_model.clone();
        let expansion = q_expansion.clone();
        Arc::new(move |s, x| match source_model.as_ref() {
            Some(fit) => fit.predict_row(&expansion.row(x))[s],
            None => 1.0,
        })
    };

    let treat_models = Arc::new(treat_models);
    let eta_fn: Arc<ArmFn> = {
        let treat_models = treat_models.clone();
        let source_model = source_model.clone();
        let expansion = expansion.clone();
        Arc::new(move |a, x| {
            let row = expansion.row(x);
            let mut total = 0.0;
            match source_model.as_ref() {
                Some(qfit) => {
                    let qs = qfit.predict_row(&row);
                    for (s, tm) in treat_models.iter().enumerate() {
                        if let Some(tm) = tm {
                            total += qs[s] * tm.prob(a, &row);
                        }
                    }
                }
                None => {
                    if let Some(Some(tm)) = treat_models.first() {
                        total = tm.prob(a, &row);
                    }
                }
            }
            total
        })
    };

    let p_fn: Option<Arc<UnaryFn>> = participation.map(|(expansion, fit)| {
        let f: Arc<UnaryFn> = Arc::new(move |x: &[f64]| fit.predict_row(&expansion.row(x)));
        f
    });

    Ok(NuisanceSet {
        mu: mu_fn,
        eta: eta_fn,
        q: q_fn,
        p: p_fn,
        trim_epsilon: spec.trim_epsilon,
        fold_id,
        warnings,
        coefficient_report: report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationStyle {
    /// Independent noise at every distinct evaluation point (white-noise
    /// field; deterministic per point given the seed).
    PerPoint,
    /// One noise draw per nuisance function.
    Scalar,
}

/// Configuration for synthetic nuisance perturbation: noise is
/// N(n^-r, n^-2r), added to the outcome regression directly and to the
/// probability models on the logit scale with a 1.3 multiplier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub h: f64,
    pub rate_r: f64,
    pub multiplier_mu: f64,
    pub multiplier_eta: f64,
    pub multiplier_q: f64,
    pub seed: u64,
    pub style: PerturbationStyle,
}

impl PerturbationConfig {
    pub fn new(h: f64, rate_r: f64, seed: u64) -> Self {
        PerturbationConfig {
            h,
            rate_r,
            multiplier_mu: 1.0,
            multiplier_eta: 1.3,
            multiplier_q: 1.3,
            seed,
            style: PerturbationStyle::PerPoint,
        }
    }
}

/// Standard normal deviate derived deterministically from (seed, tag, x).
fn hashed_gaussian(seed: u64, tag: u64, x: &[f64], per_point: bool) -> f64 {
    let mut state = seed ^ tag.wrapping_mul(0x9E3779B97F4A7C15);
    if per_point {
        for v in x {
            state ^= v.to_bits();
            splitmix64(&mut state);
        }
    }
    splitmix64(&mut state);
    let u1 = u64_to_unit(state);
    splitmix64(&mut state);
    let u2 = u64_to_unit(state);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Perturb oracle nuisance functions so their L2 errors are O(n^-r):
/// mu + h*eps_mu; expit(logit(eta) + 1.3h*eps_eta); likewise for q.
pub fn perturb_oracle(truth: &NuisanceSet, cfg: &PerturbationConfig, n: usize) -> NuisanceSet {
    let m = (n as f64).powf(-cfg.rate_r);
    let per_point = cfg.style == PerturbationStyle::PerPoint;
    let (h, seed) = (cfg.h, cfg.seed);
    let eps = move |tag: u64, x: &[f64]| -> f64 { m + m * hashed_gaussian(seed, tag, x, per_point) };

    let trim = truth.trim_epsilon;
    let mu_mult = cfg.multiplier_mu;
    let eta_mult = cfg.multiplier_eta;
    let q_mult = cfg.multiplier_q;

    let base = truth.clone();
    let mu_fn: Arc<ArmFn> = {
        let base = base.clone();
        Arc::new(move |a, x: &[f64]| base.mu(a, x) + h * mu_mult * eps(1, x))
    };
    let eta_fn: Arc<ArmFn> = {
        let base = base.clone();
        Arc::new(move |a, x: &[f64]| {
            let p = base.eta_raw(a, x).clamp(1e-12, 1.0 - 1e-12);
            expit(logit(p) + eta_mult * h * eps(2, x))
        })
    };
    let q_fn: Arc<ArmFn> = {
        let base = base.clone();
        Arc::new(move |s, x: &[f64]| {
            let p = base.q_raw(s, x).clamp(1e-12, 1.0 - 1e-12);
            expit(logit(p) + q_mult * h * eps(3, x))
        })
    };

    NuisanceSet {
        mu: mu_fn,
        eta: eta_fn,
        q: q_fn,
        p: truth.p.clone(),
        trim_epsilon: trim,
        fold_id: truth.fold_id,
        warnings: Vec::new(),
        coefficient_report: Vec::new(),
    }
}
