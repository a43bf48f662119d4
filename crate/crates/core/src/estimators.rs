//! Subgroup potential-outcome means and treatment-effect contrasts for
//! internal and external targets: doubly robust (influence-function based),
//! plug-in (G-computation), and IPTW estimators with stratified
//! cross-fitting.
//!
//! All three estimators share the same cell structure. With per-fold
//! inverse cell frequency kappa_j = n_j / n_cell_j,
//!
//!   DR:      (kappa/n) sum_i I(x~)[ ind_t mu_a(X_i) + ind_w w_i (Y_i - mu_a(X_i)) ]
//!   plug-in: (kappa/n) sum_i I(x~)  ind_t mu_a(X_i)
//!   IPTW:    (kappa/n) sum_i I(x~)  ind_w w_i Y_i
//!
//! where for an internal target s: ind_t = I(S=s), ind_w = I(A=a) and
//! w = q_s(X)/eta_a(X); for the external target: ind_t = I(R=0),
//! ind_w = I(A=a, R=1) and w = (1-p(X)) / (p(X) e_a(X)).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubgroupSpec, TargetSpec};
use crate::error::{Error, Result};
use crate::nuisance::{fit_nuisances, NuisanceSet, NuisanceSpec};
use crate::stats::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Dr,
    PlugIn,
    Iptw,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Dr => write!(f, "dr"),
            Method::PlugIn => write!(f, "plugin"),
            Method::Iptw => write!(f, "iptw"),
        }
    }
}

/// Stratified fold assignment plus one NuisanceSet per fold, trained on the
/// fold's complement.
#[derive(Debug)]
pub struct CrossFit {
    pub target: TargetSpec,
    /// Dataset row indices forming the estimation population.
    pub rows: Vec<usize>,
    /// Fold id per entry of `rows`.
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub nuisances: Vec<NuisanceSet>,
}

/// Stratified fold assignment: rows are grouped by source (plus an R=0
/// stratum for external targets), shuffled with a seeded substream, and
/// dealt round-robin so fold sizes per stratum differ by at most one.
pub fn assign_folds(
    d: &Dataset,
    target: TargetSpec,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if k < 1 {
        return Err(Error::InvalidConfig("folds must be >= 1".into()));
    }
    d.check_target(target)?;
    let rows = d.estimation_indices(target);
    let n_sources = d.n_sources();
    // stratum id: source index for multi-source rows, n_sources for R=0
    let stratum_of = |i: usize| -> usize {
        match d.s(i) {
            Some(s) => s,
            None => n_sources,
        }
    };
    let n_strata = n_sources + 1;
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for (pos, &i) in rows.iter().enumerate() {
        strata[stratum_of(i)].push(pos);
    }
    let mut fold_of = vec![0usize; rows.len()];
    for (sid, members) in strata.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if k > 1 && members.len() < k {
            let name = if sid < n_sources {
                d.source_labels()[sid].clone()
            } else {
                "external".to_string()
            };
            return Err(Error::StratumTooSmall {
                stratum: name,
                count: members.len(),
                folds: k,
            });
        }
        let mut rng = substream(seed, sid as u64);
        members.shuffle(&mut rng);
        for (j, &pos) in members.iter().enumerate() {
            fold_of[pos] = j % k;
        }
    }
    Ok((rows, fold_of))
}

/// Split the estimation population into K stratified folds and train one
/// NuisanceSet per fold on its complement. Deterministic given the seed.
pub fn cross_fit(
    d: &Dataset,
    spec: &NuisanceSpec,
    target: TargetSpec,
    k: usize,
    seed: u64,
) -> Result<CrossFit> {
    if k < 2 {
        return Err(Error::InvalidConfig(
            "cross-fitting needs k >= 2 (use CrossFit::single for externally supplied nuisances)"
                .into(),
        ));
    }
    let (rows, fold_of) = assign_folds(d, target, k, seed)?;
    let mut nuisances = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<usize> = rows
            .iter()
            .zip(fold_of.iter())
            .filter(|(_, &f)| f != fold)
            .map(|(&i, _)| i)
            .collect();
        nuisances.push(fit_nuisances(d, spec, target, &train, fold)?);
    }
    Ok(CrossFit {
        target,
        rows,
        fold_of,
        k,
        nuisances,
    })
}

impl CrossFit {
    /// Single evaluation fold with an externally supplied nuisance set
    /// (oracle nuisances, or pre-trained models).
    pub fn single(d: &Dataset, target: TargetSpec, nuisances: NuisanceSet) -> Result<Self> {
        d.check_target(target)?;
        let rows = d.estimation_indices(target);
        let fold_of = vec![0usize; rows.len()];
        Ok(CrossFit {
            target,
            rows,
            fold_of,
            k: 1,
            nuisances: vec![nuisances],
        })
    }
}

/// Point estimate with influence-function inference for one
/// (target, treatment, subgroup) cell.
#[derive(Debug, Clone)]
pub struct SubgroupEstimate {
    pub target: TargetSpec,
    pub treatment: usize,
    pub subgroup: Vec<f64>,
    pub method: Method,
    pub point: f64,
    /// IF-based standard error; None for plug-in and IPTW.
    pub se: Option<f64>,
    /// Estimated influence values aligned with the estimation rows;
    /// None for plug-in and IPTW.
    pub if_values: Option<Vec<f64>>,
    /// Pooled inverse empirical cell frequency (kappa or gamma).
    pub kappa_or_gamma: f64,
    pub n_cell: usize,
    pub max_weight: f64,
    pub folds: usize,
    pub fold_points: Vec<f64>,
    pub fold_cell_counts: Vec<usize>,
    pub fold_sizes: Vec<usize>,
}

/// Treatment-effect contrast between two arms in one subgroup.
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub target: TargetSpec,
    pub pair: (usize, usize),
    pub subgroup: Vec<f64>,
    pub method: Method,
    pub point: f64,
    pub se: Option<f64>,
    pub if_values: Option<Vec<f64>>,
}

/// Per-row nuisance evaluations for one (cross-fit, treatment) pair,
/// reused across subgroup levels, methods, and bootstrap replicates.
pub struct CellEvaluator<'a> {
    d: &'a Dataset,
    pub cf: &'a CrossFit,
    pub treatment: usize,
    mu: Vec<f64>,
    weight: Vec<f64>,
    ind_t: Vec<bool>,
    ind_w: Vec<bool>,
    y: Vec<f64>,
}

impl<'a> CellEvaluator<'a> {
    pub fn new(d: &'a Dataset, cf: &'a CrossFit, treatment: usize) -> Result<Self> {
        let n = cf.rows.len();
        let mut mu = vec![0.0; n];
        let mut weight = vec![0.0; n];
        let mut ind_t = vec![false; n];
        let mut ind_w = vec![false; n];
        let mut y = vec![0.0; n];
        for (pos, (&i, &fold)) in cf.rows.iter().zip(cf.fold_of.iter()).enumerate() {
            let ns = &cf.nuisances[fold];
            let x = d.x(i);
            let mu_i = ns.mu(treatment, x);
            if !mu_i.is_finite() {
                return Err(Error::NonFiniteWeight {
                    detail: format!("outcome prediction at row {i} is not finite"),
                });
            }
            mu[pos] = mu_i;
            ind_t[pos] = d.in_target(i, cf.target);
            let treated = d.a(i) == Some(treatment);
            match cf.target {
                TargetSpec::Internal { source } => {
                    if treated {
                        // With a single source, q_s is identically 1 and is
                        // not an estimated quantity; skip it so degenerate
                        // one-source data stays exact.
                        let q = if d.n_sources() == 1 {
                            1.0
                        } else {
                            ns.q(source, x)
                        };
                        let w = q / ns.eta(treatment, x);
                        if !w.is_finite() {
                            return Err(Error::NonFiniteWeight {
                                detail: format!("q/eta weight at row {i} is not finite"),
                            });
                        }
                        weight[pos] = w;
                        ind_w[pos] = true;
                    }
                }
                TargetSpec::External => {
                    if treated && d.r(i) {
                        let p = ns.p(x).ok_or_else(|| Error::NonFiniteWeight {
                            detail: "participation model missing for external target".into(),
                        })?;
                        let w = (1.0 - p) / (p * ns.eta(treatment, x));
                        if !w.is_finite() {
                            return Err(Error::NonFiniteWeight {
                                detail: format!("(1-p)/(p e) weight at row {i} is not finite"),
                            });
                        }
                        weight[pos] = w;
                        ind_w[pos] = true;
                    }
                }
            }
            if let Some(yi) = d.y(i) {
                y[pos] = yi;
            }
        }
        Ok(CellEvaluator {
            d,
            cf,
            treatment,
            mu,
            weight,
            ind_t,
            ind_w,
            y,
        })
    }

    fn level_mask(&self, spec: &SubgroupSpec, level_idx: usize) -> Vec<bool> {
        self.cf
            .rows
            .iter()
            .map(|&i| spec.matches(self.d, i, level_idx))
            .collect()
    }

    /// Full estimate with influence values (DR) for one subgroup level.
    pub fn estimate(
        &self,
        method: Method,
        spec: &SubgroupSpec,
        level_idx: usize,
    ) -> Result<SubgroupEstimate> {
        let mask = self.level_mask(spec, level_idx);
        let k = self.cf.k;
        let n = self.cf.rows.len();

        let mut fold_sizes = vec![0usize; k];
        let mut fold_cell = vec![0usize; k];
        let mut fold_sum = vec![0.0; k];
        let mut max_weight: f64 = 0.0;
        for pos in 0..n {
            let fold = self.cf.fold_of[pos];
            fold_sizes[fold] += 1;
            if !mask[pos] {
                continue;
            }
            if self.ind_t[pos] {
                fold_cell[fold] += 1;
            }
            let mut c = 0.0;
            match method {
                Method::Dr => {
                    if self.ind_t[pos] {
                        c += self.mu[pos];
                    }
                    if self.ind_w[pos] {
                        c += self.weight[pos] * (self.y[pos] - self.mu[pos]);
                    }
                }
                Method::PlugIn => {
                    if self.ind_t[pos] {
                        c = self.mu[pos];
                    }
                }
                Method::Iptw => {
                    if self.ind_w[pos] {
                        c = self.weight[pos] * self.y[pos];
                    }
                }
            }
            if self.ind_w[pos] {
                max_weight = max_weight.max(self.weight[pos]);
            }
            fold_sum[fold] += c;
        }

        let mut fold_points = Vec::with_capacity(k);
        for fold in 0..k {
            if fold_cell[fold] == 0 {
                return Err(Error::ZeroCell {
                    cell: format!(
                        "x~ = ({}) in target {} (fold {fold})",
                        spec.level_label(level_idx),
                        self.cf.target
                    ),
                });
            }
            fold_points.push(fold_sum[fold] / fold_cell[fold] as f64);
        }
        let point = fold_points.iter().sum::<f64>() / k as f64;
        let n_cell: usize = fold_cell.iter().sum();

        let (se, if_values) = if method == Method::Dr {
            let mut values = vec![0.0; n];
            let mut sum_sq = 0.0;
            for pos in 0..n {
                let fold = self.cf.fold_of[pos];
                if !mask[pos] {
                    continue;
                }
                let kappa = fold_sizes[fold] as f64 / fold_cell[fold] as f64;
                let mut v = 0.0;
                if self.ind_t[pos] {
                    v += self.mu[pos] - fold_points[fold];
                }
                if self.ind_w[pos] {
                    v += self.weight[pos] * (self.y[pos] - self.mu[pos]);
                }
                let phi = kappa * v;
                values[pos] = phi;
                sum_sq += phi * phi;
            }
            let se = (sum_sq / (n as f64 * n as f64)).sqrt();
            (Some(se), Some(values))
        } else {
            (None, None)
        };

        Ok(SubgroupEstimate {
            target: self.cf.target,
            treatment: self.treatment,
            subgroup: spec.levels[level_idx].clone(),
            method,
            point,
            se,
            if_values,
            kappa_or_gamma: n as f64 / n_cell as f64,
            n_cell,
            max_weight,
            folds: k,
            fold_points,
            fold_cell_counts: fold_cell,
            fold_sizes,
        })
    }

    /// Cross-fitted point estimate over a multiset of row positions
    /// (positions index into `cf.rows`; each keeps its original fold).
    /// Used by the bootstrap fast path. Errors when a fold loses the cell.
    pub fn point_for_positions(
        &self,
        method: Method,
        spec: &SubgroupSpec,
        level_idx: usize,
        positions: &[usize],
    ) -> Result<f64> {
        let mask = self.level_mask(spec, level_idx);
        let k = self.cf.k;
        let mut fold_cell = vec![0usize; k];
        let mut fold_sum = vec![0.0; k];
        let mut fold_seen = vec![false; k];
        for &pos in positions {
            let fold = self.cf.fold_of[pos];
            fold_seen[fold] = true;
            if !mask[pos] {
                continue;
            }
            if self.ind_t[pos] {
                fold_cell[fold] += 1;
            }
            let mut c = 0.0;
            match method {
                Method::Dr => {
                    if self.ind_t[pos] {
                        c += self.mu[pos];
                    }
                    if self.ind_w[pos] {
                        c += self.weight[pos] * (self.y[pos] - self.mu[pos]);
                    }
                }
                Method::PlugIn => {
                    if self.ind_t[pos] {
                        c = self.mu[pos];
                    }
                }
                Method::Iptw => {
                    if self.ind_w[pos] {
                        c = self.weight[pos] * self.y[pos];
                    }
                }
            }
            fold_sum[fold] += c;
        }
        let mut total = 0.0;
        let mut used = 0usize;
        for fold in 0..k {
            if !fold_seen[fold] {
                continue;
            }
            if fold_cell[fold] == 0 {
                return Err(Error::ZeroCell {
                    cell: format!(
                        "x~ = ({}) fold {fold} (resample)",
                        spec.level_label(level_idx)
                    ),
                });
            }
            total += fold_sum[fold] / fold_cell[fold] as f64;
            used += 1;
        }
        Ok(total / used as f64)
    }
}

/// One-shot estimate for a single (method, treatment, subgroup level) cell.
pub fn estimate_cell(
    d: &Dataset,
    cf: &CrossFit,
    method: Method,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    CellEvaluator::new(d, cf, treatment)?.estimate(method, spec, level_idx)
}

pub fn estimate_internal_dr(
    d: &Dataset,
    cf: &CrossFit,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    expect_internal(cf)?;
    estimate_cell(d, cf, Method::Dr, treatment, spec, level_idx)
}

pub fn estimate_internal_plugin(
    d: &Dataset,
    cf: &CrossFit,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    expect_internal(cf)?;
    estimate_cell(d, cf, Method::PlugIn, treatment, spec, level_idx)
}

pub fn estimate_internal_iptw(
    d: &Dataset,
    cf: &CrossFit,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    expect_internal(cf)?;
    estimate_cell(d, cf, Method::Iptw, treatment, spec, level_idx)
}

pub fn estimate_external_dr(
    d: &Dataset,
    cf: &CrossFit,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    expect_external(cf)?;
    estimate_cell(d, cf, Method::Dr, treatment, spec, level_idx)
}

pub fn estimate_external_plugin(
    d: &Dataset,
    cf: &CrossFit,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    expect_external(cf)?;
    estimate_cell(d, cf, Method::PlugIn, treatment, spec, level_idx)
}

pub fn estimate_external_iptw(
    d: &Dataset,
    cf: &CrossFit,
    treatment: usize,
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<SubgroupEstimate> {
    expect_external(cf)?;
    estimate_cell(d, cf, Method::Iptw, treatment, spec, level_idx)
}

fn expect_internal(cf: &CrossFit) -> Result<()> {
    match cf.target {
        TargetSpec::Internal { .. } => Ok(()),
        TargetSpec::External => Err(Error::InvalidConfig(
            "internal estimator called with an external-target cross-fit".into(),
        )),
    }
}

fn expect_external(cf: &CrossFit) -> Result<()> {
    match cf.target {
        TargetSpec::External => Ok(()),
        TargetSpec::Internal { .. } => Err(Error::InvalidConfig(
            "external estimator called with an internal-target cross-fit".into(),
        )),
    }
}

/// Contrast of two potential-outcome means in one subgroup. The influence
/// values are the elementwise difference of the component influence values.
pub fn estimate_effect(
    d: &Dataset,
    cf: &CrossFit,
    method: Method,
    pair: (usize, usize),
    spec: &SubgroupSpec,
    level_idx: usize,
) -> Result<EffectEstimate> {
    let est_a = estimate_cell(d, cf, method, pair.0, spec, level_idx)?;
    let est_b = estimate_cell(d, cf, method, pair.1, spec, level_idx)?;
    let point = est_a.point - est_b.point;
    let (se, if_values) = match (est_a.if_values, est_b.if_values) {
        (Some(va), Some(vb)) => {
            let n = va.len();
            let diff: Vec<f64> = va.iter().zip(vb.iter()).map(|(x, y)| x - y).collect();
            let sum_sq: f64 = diff.iter().map(|v| v * v).sum();
            (Some((sum_sq / (n as f64 * n as f64)).sqrt()), Some(diff))
        }
        _ => (None, None),
    };
    Ok(EffectEstimate {
        target: cf.target,
        pair,
        subgroup: spec.levels[level_idx].clone(),
        method,
        point,
        se,
        if_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use std::sync::Arc;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Two sources, one binary effect modifier, deterministic outcomes.
    fn discrete_dataset() -> Dataset {
        let mut obs = Vec::new();
        // per (xt, s): 8 rows: treated/control split evenly; y = f(xt, a)
        for &xt in &[0.0, 1.0] {
            for s in 0..2usize {
                for k in 0..8usize {
                    let a = k % 2;
                    let y = 1.0 + 2.0 * xt + 3.0 * a as f64;
                    obs.push(Observation {
                        y: Some(y),
                        a: Some(a),
                        s: Some(s),
                        r: true,
                        x: vec![xt],
                    });
                }
            }
        }
        Dataset::new(obs, labels(&["x1"]), labels(&["0", "1"]), labels(&["1", "2"]))
            .unwrap()
            .validate()
            .unwrap()
    }

    fn oracle_for_discrete(trim: f64) -> NuisanceSet {
        NuisanceSet::from_functions(
            Arc::new(|a, x: &[f64]| 1.0 + 2.0 * x[0] + 3.0 * a as f64),
            Arc::new(|_a, _x: &[f64]| 0.5),
            Arc::new(|_s, _x: &[f64]| 0.5),
            None,
            trim,
            0,
        )
    }

    #[test]
    fn constant_outcome_recovered_exactly() {
        let mut obs = Vec::new();
        for k in 0..40usize {
            obs.push(Observation {
                y: Some(7.5),
                a: Some(k % 2),
                s: Some(0),
                r: true,
                x: vec![(k % 2) as f64],
            });
        }
        let d = Dataset::new(obs, labels(&["x1"]), labels(&["0", "1"]), labels(&["1"]))
            .unwrap()
            .validate()
            .unwrap();
        let ns = NuisanceSet::from_functions(
            Arc::new(|_a, _x: &[f64]| 7.5),
            Arc::new(|_a, _x: &[f64]| 0.5),
            Arc::new(|_s, _x: &[f64]| 1.0),
            None,
            0.01,
            0,
        );
        let target = TargetSpec::Internal { source: 0 };
        let cf = CrossFit::single(&d, target, ns).unwrap();
        let spec = SubgroupSpec::enumerate(&d, vec![0], target).unwrap();
        for level in 0..spec.levels.len() {
            let est = estimate_internal_dr(&d, &cf, 1, &spec, level).unwrap();
            assert!((est.point - 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn dr_and_plugin_match_enumeration_oracle() {
        let d = discrete_dataset();
        let target = TargetSpec::Internal { source: 0 };
        let cf = CrossFit::single(&d, target, oracle_for_discrete(0.01)).unwrap();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![1.0]]);
        // Brute force: E(Y|A=1, x) * Pr(x | x~=1, S=0) with x~ = x, so the
        // conditional distribution is a point mass at x=1.
        let truth = 1.0 + 2.0 * 1.0 + 3.0;
        let dr = estimate_internal_dr(&d, &cf, 1, &spec, 0).unwrap();
        let plug = estimate_internal_plugin(&d, &cf, 1, &spec, 0).unwrap();
        assert!((dr.point - truth).abs() < 1e-12, "dr {}", dr.point);
        assert!((plug.point - truth).abs() < 1e-12);
        // IF mean zero by construction
        let ifs = dr.if_values.unwrap();
        let mean: f64 = ifs.iter().sum::<f64>() / ifs.len() as f64;
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn iptw_collapses_to_subgroup_treated_mean() {
        // One source, constant weights: eta = marginal Pr(A=1) = 1/2 and
        // q = 1, with exactly half of each cell treated.
        let mut obs = Vec::new();
        let ys = [4.0, 8.0, 3.0, 9.0];
        for (k, &y) in ys.iter().enumerate() {
            // cell x=1: rows 0..4, alternating treatment
            obs.push(Observation {
                y: Some(y),
                a: Some(k % 2),
                s: Some(0),
                r: true,
                x: vec![1.0],
            });
            obs.push(Observation {
                y: Some(y + 1.0),
                a: Some(k % 2),
                s: Some(0),
                r: true,
                x: vec![2.0],
            });
        }
        let d = Dataset::new(obs, labels(&["x1"]), labels(&["0", "1"]), labels(&["1"]))
            .unwrap()
            .validate()
            .unwrap();
        let ns = NuisanceSet::from_functions(
            Arc::new(|_a, _x: &[f64]| 0.0),
            Arc::new(|a, _x: &[f64]| if a == 1 { 0.5 } else { 0.5 }),
            Arc::new(|_s, _x: &[f64]| 1.0),
            None,
            0.01,
            0,
        );
        let target = TargetSpec::Internal { source: 0 };
        let cf = CrossFit::single(&d, target, ns).unwrap();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![1.0]]);
        let est = estimate_internal_iptw(&d, &cf, 1, &spec, 0).unwrap();
        // treated rows in cell x=1: y in {8.0, 9.0} -> mean 8.5
        assert!((est.point - 8.5).abs() < 1e-12, "{}", est.point);
        assert!(est.se.is_none());
    }

    #[test]
    fn effect_is_antisymmetric_and_zero_on_self() {
        let d = discrete_dataset();
        let target = TargetSpec::Internal { source: 1 };
        let cf = CrossFit::single(&d, target, oracle_for_discrete(0.01)).unwrap();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![0.0]]);
        let fwd = estimate_effect(&d, &cf, Method::Dr, (1, 0), &spec, 0).unwrap();
        let rev = estimate_effect(&d, &cf, Method::Dr, (0, 1), &spec, 0).unwrap();
        assert!((fwd.point + rev.point).abs() < 1e-12);
        assert!((fwd.point - 3.0).abs() < 1e-12);
        let same = estimate_effect(&d, &cf, Method::Dr, (1, 1), &spec, 0).unwrap();
        assert!(same.point.abs() < 1e-12);
        assert!(same.se.unwrap() < 1e-12);
    }

    #[test]
    fn zero_cell_is_an_error() {
        let d = discrete_dataset();
        let target = TargetSpec::Internal { source: 0 };
        let cf = CrossFit::single(&d, target, oracle_for_discrete(0.01)).unwrap();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![5.0]]);
        assert!(matches!(
            estimate_internal_dr(&d, &cf, 1, &spec, 0),
            Err(Error::ZeroCell { .. })
        ));
    }

    fn sized_dataset(sizes: &[usize]) -> Dataset {
        let mut obs = Vec::new();
        for (s, &ns) in sizes.iter().enumerate() {
            for k in 0..ns {
                obs.push(Observation {
                    y: Some(k as f64),
                    a: Some(k % 2),
                    s: Some(s),
                    r: true,
                    x: vec![(k % 2) as f64, k as f64],
                });
            }
        }
        let source_labels: Vec<String> = (1..=sizes.len()).map(|s| s.to_string()).collect();
        Dataset::new(obs, labels(&["x1", "x2"]), labels(&["0", "1"]), source_labels)
            .unwrap()
            .validate()
            .unwrap()
    }

    #[test]
    fn stratified_halving_is_exact() {
        let d = sized_dataset(&[40, 20, 10]);
        let target = TargetSpec::Internal { source: 0 };
        let (rows, fold_of) = assign_folds(&d, target, 2, 7).unwrap();
        for s in 0..3usize {
            for fold in 0..2usize {
                let count = rows
                    .iter()
                    .zip(fold_of.iter())
                    .filter(|(&i, &f)| d.s(i) == Some(s) && f == fold)
                    .count();
                assert_eq!(count, [20, 10, 5][s], "source {s} fold {fold}");
            }
        }
    }

    #[test]
    fn fold_assignment_is_deterministic_and_partitions() {
        let d = sized_dataset(&[31, 17]);
        let target = TargetSpec::Internal { source: 0 };
        let (rows1, folds1) = assign_folds(&d, target, 2, 7).unwrap();
        let (rows2, folds2) = assign_folds(&d, target, 2, 7).unwrap();
        assert_eq!(rows1, rows2);
        assert_eq!(folds1, folds2);
        // partition: every estimation row appears exactly once
        assert_eq!(rows1.len(), 48);
        let mut seen = vec![false; d.len()];
        for &i in &rows1 {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }

    #[test]
    fn stratum_too_small_detected() {
        let d = sized_dataset(&[40, 1]);
        let target = TargetSpec::Internal { source: 0 };
        assert!(matches!(
            assign_folds(&d, target, 2, 7),
            Err(Error::StratumTooSmall { .. })
        ));
    }

    #[test]
    fn aggregation_identity_per_fold() {
        // Exhaustive subgroup estimates aggregate exactly to the
        // no-subgroup transport estimate, fold by fold.
        let d = discrete_dataset();
        let target = TargetSpec::Internal { source: 0 };
        let cf = CrossFit::single(&d, target, oracle_for_discrete(0.01)).unwrap();
        let spec = SubgroupSpec::enumerate(&d, vec![0], target).unwrap();
        let ev = CellEvaluator::new(&d, &cf, 1).unwrap();

        // no-subgroup estimate via an empty effect-modifier declaration
        let overall_spec = SubgroupSpec::declared(vec![], vec![vec![]]);
        let overall = ev.estimate(Method::Dr, &overall_spec, 0).unwrap();

        for fold in 0..cf.k {
            let mut agg = 0.0;
            let mut n_s = 0usize;
            let mut parts = Vec::new();
            for level in 0..spec.levels.len() {
                let est = ev.estimate(Method::Dr, &spec, level).unwrap();
                parts.push((est.fold_cell_counts[fold], est.fold_points[fold]));
                n_s += est.fold_cell_counts[fold];
            }
            for (count, point) in parts {
                agg += count as f64 / n_s as f64 * point;
            }
            assert!(
                (agg - overall.fold_points[fold]).abs() < 1e-10,
                "fold {fold}: {agg} vs {}",
                overall.fold_points[fold]
            );
        }
    }
}
