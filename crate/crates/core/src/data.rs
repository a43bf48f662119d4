//! Domain data model: observations, datasets, target-population and
//! subgroup declarations, and validation.
//!
//! A dataset mixes multi-source records (R = 1, with outcome, treatment and
//! source observed) and optional external-population records (R = 0,
//! covariates only). Validation enforces that missingness follows R exactly.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject's record. `y`, `a`, `s` must all be present when `r` is true
/// and all absent when `r` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Option<f64>,
    /// Treatment index into the dataset's treatment labels.
    pub a: Option<usize>,
    /// Source index into the dataset's source labels.
    pub s: Option<usize>,
    /// Multi-source indicator: true = in the multi-source data.
    pub r: bool,
    pub x: Vec<f64>,
}

/// How a covariate column enters nuisance design matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateKind {
    Continuous,
    /// Discrete column; `levels` are the distinct observed values in order.
    Categorical { levels: Vec<f64> },
}

/// Target population for estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSpec {
    /// The population underlying one source of the multi-source data.
    Internal { source: usize },
    /// The covariate-only population indexed by R = 0.
    External,
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Internal { source } => write!(f, "internal:{source}"),
            TargetSpec::External => write!(f, "external"),
        }
    }
}

/// Declaration of the effect-modifier coordinates and the subgroup levels
/// of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    /// Indices into the covariate vector identifying the effect modifiers.
    pub columns: Vec<usize>,
    /// Concrete level vectors; each has `columns.len()` entries.
    pub levels: Vec<Vec<f64>>,
    /// True when `levels` partitions all observed effect-modifier values.
    pub exhaustive: bool,
}

impl SubgroupSpec {
    /// Explicit user-declared levels (not assumed exhaustive).
    pub fn declared(columns: Vec<usize>, levels: Vec<Vec<f64>>) -> Self {
        SubgroupSpec {
            columns,
            levels,
            exhaustive: false,
        }
    }

    /// Enumerate all distinct effect-modifier values observed in the target
    /// population, in sorted order. The result is exhaustive by construction.
    pub fn enumerate(dataset: &Dataset, columns: Vec<usize>, target: TargetSpec) -> Result<Self> {
        for &c in &columns {
            if c >= dataset.p() {
                return Err(Error::InvalidConfig(format!(
                    "subgroup column {c} out of range (p = {})",
                    dataset.p()
                )));
            }
        }
        let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
        let mut levels = Vec::new();
        for i in dataset.target_member_indices(target) {
            let key: Vec<f64> = columns.iter().map(|&c| dataset.x(i)[c]).collect();
            let bits: Vec<u64> = key.iter().map(|v| v.to_bits()).collect();
            if seen.insert(bits) {
                levels.push(key);
            }
        }
        levels.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != std::cmp::Ordering::Equal)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if levels.is_empty() {
            return Err(Error::ZeroCell {
                cell: format!("no observations in target {target}"),
            });
        }
        Ok(SubgroupSpec {
            columns,
            levels,
            exhaustive: true,
        })
    }

    /// Whether row `i` of `d` falls in subgroup level `level_idx`.
    /// Level values compare exactly; effect modifiers are discrete codes.
    #[inline]
    pub fn matches(&self, d: &Dataset, i: usize, level_idx: usize) -> bool {
        let level = &self.levels[level_idx];
        let row = d.x(i);
        self.columns
            .iter()
            .zip(level.iter())
            .all(|(&c, &v)| row[c] == v)
    }

    pub fn level_label(&self, level_idx: usize) -> String {
        self.levels[level_idx]
            .iter()
            .map(|v| {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    format!("{}", *v as i64)
                } else {
                    format!("{v}")
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Validated collection of observations with level metadata and counts.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<Option<f64>>,
    a: Vec<Option<usize>>,
    s: Vec<Option<usize>>,
    r: Vec<bool>,
    x: Vec<f64>, // row-major, n * p
    p: usize,
    covariate_names: Vec<String>,
    covariate_kinds: Vec<CovariateKind>,
    treatment_labels: Vec<String>,
    source_labels: Vec<String>,
    source_counts: Vec<usize>,
    n_external: usize,
    validated: bool,
    warnings: Vec<String>,
}

impl Dataset {
    /// Assemble an unvalidated dataset. Call [`Dataset::validate`] before use.
    pub fn new(
        observations: Vec<Observation>,
        covariate_names: Vec<String>,
        treatment_labels: Vec<String>,
        source_labels: Vec<String>,
    ) -> Result<Self> {
        let p = covariate_names.len();
        let n = observations.len();
        let mut y = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * p);
        for (i, obs) in observations.into_iter().enumerate() {
            if obs.x.len() != p {
                return Err(Error::InvalidConfig(format!(
                    "row {i}: covariate vector has length {} but p = {p}",
                    obs.x.len()
                )));
            }
            y.push(obs.y);
            a.push(obs.a);
            s.push(obs.s);
            r.push(obs.r);
            x.extend_from_slice(&obs.x);
        }
        Ok(Dataset {
            y,
            a,
            s,
            r,
            x,
            p,
            covariate_names,
            covariate_kinds: Vec::new(),
            treatment_labels,
            source_labels,
            source_counts: Vec::new(),
            n_external: 0,
            validated: false,
            warnings: Vec::new(),
        })
    }

    /// Verify the missingness pattern, enumerate levels, and compute
    /// per-source counts. Idempotent: validating a validated dataset
    /// re-checks the same invariants and returns the same dataset.
    pub fn validate(mut self) -> Result<Self> {
        let n = self.len();
        if n == 0 {
            return Err(Error::EmptySource {
                name: "multi-source data is empty".into(),
            });
        }
        for i in 0..n {
            if self.r[i] {
                if self.y[i].is_none() || self.a[i].is_none() || self.s[i].is_none() {
                    return Err(Error::MixedMissingness {
                        row: i,
                        r: 1,
                        detail: "y, a, s must all be present when r = 1".into(),
                    });
                }
                if !self.y[i].unwrap().is_finite() {
                    return Err(Error::NonFiniteCovariate {
                        row: i,
                        column: "y".into(),
                    });
                }
                let ai = self.a[i].unwrap();
                if ai >= self.treatment_labels.len() {
                    return Err(Error::InvalidConfig(format!(
                        "row {i}: treatment index {ai} out of range"
                    )));
                }
                let si = self.s[i].unwrap();
                if si >= self.source_labels.len() {
                    return Err(Error::InvalidConfig(format!(
                        "row {i}: source index {si} out of range"
                    )));
                }
            } else if self.y[i].is_some() || self.a[i].is_some() || self.s[i].is_some() {
                return Err(Error::MixedMissingness {
                    row: i,
                    r: 0,
                    detail: "y, a, s must all be absent when r = 0".into(),
                });
            }
            for j in 0..self.p {
                if !self.x[i * self.p + j].is_finite() {
                    return Err(Error::NonFiniteCovariate {
                        row: i,
                        column: self.covariate_names[j].clone(),
                    });
                }
            }
        }

        let mut counts = vec![0usize; self.source_labels.len()];
        let mut n_external = 0usize;
        for i in 0..n {
            match self.s[i] {
                Some(si) => counts[si] += 1,
                None => n_external += 1,
            }
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::EmptySource {
                name: "no multi-source (r = 1) records".into(),
            });
        }
        let mut warnings = Vec::new();
        for (si, &c) in counts.iter().enumerate() {
            if c == 0 {
                warnings.push(format!(
                    "source {} has no observations and is dropped",
                    self.source_labels[si]
                ));
            }
        }
        // Positivity diagnostics per (treatment, source) cell.
        let mut cell = vec![0usize; self.treatment_labels.len() * self.source_labels.len()];
        for i in 0..n {
            if let (Some(ai), Some(si)) = (self.a[i], self.s[i]) {
                cell[ai * self.source_labels.len() + si] += 1;
            }
        }
        for ai in 0..self.treatment_labels.len() {
            for si in 0..self.source_labels.len() {
                if counts[si] > 0 && cell[ai * self.source_labels.len() + si] == 0 {
                    warnings.push(format!(
                        "treatment {} never observed in source {}; positivity may fail",
                        self.treatment_labels[ai], self.source_labels[si]
                    ));
                }
            }
        }

        if self.covariate_kinds.is_empty() {
            self.covariate_kinds = (0..self.p).map(|j| self.detect_kind(j)).collect();
        }
        self.source_counts = counts;
        self.n_external = n_external;
        self.validated = true;
        self.warnings = warnings;
        Ok(self)
    }

    /// A column is treated as categorical when every value is an integer and
    /// at most 12 distinct values occur.
    fn detect_kind(&self, j: usize) -> CovariateKind {
        let mut distinct: BTreeSet<u64> = BTreeSet::new();
        for i in 0..self.len() {
            let v = self.x[i * self.p + j];
            if v.fract() != 0.0 {
                return CovariateKind::Continuous;
            }
            distinct.insert(v.to_bits());
            if distinct.len() > 12 {
                return CovariateKind::Continuous;
            }
        }
        let mut levels: Vec<f64> = distinct.into_iter().map(f64::from_bits).collect();
        levels.sort_by(|a, b| a.total_cmp(b));
        CovariateKind::Categorical { levels }
    }

    /// Override auto-detected covariate kinds (before or after validation).
    pub fn set_covariate_kinds(&mut self, kinds: Vec<CovariateKind>) -> Result<()> {
        if kinds.len() != self.p {
            return Err(Error::InvalidConfig(format!(
                "expected {} covariate kinds, got {}",
                self.p,
                kinds.len()
            )));
        }
        self.covariate_kinds = kinds;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn y(&self, i: usize) -> Option<f64> {
        self.y[i]
    }

    #[inline]
    pub fn a(&self, i: usize) -> Option<usize> {
        self.a[i]
    }

    #[inline]
    pub fn s(&self, i: usize) -> Option<usize> {
        self.s[i]
    }

    #[inline]
    pub fn r(&self, i: usize) -> bool {
        self.r[i]
    }

    pub fn n_treatments(&self) -> usize {
        self.treatment_labels.len()
    }

    pub fn n_sources(&self) -> usize {
        self.source_labels.len()
    }

    pub fn treatment_labels(&self) -> &[String] {
        &self.treatment_labels
    }

    pub fn source_labels(&self) -> &[String] {
        &self.source_labels
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_kinds(&self) -> &[CovariateKind] {
        &self.covariate_kinds
    }

    /// Rows per source, in source-label order. Available after validation.
    pub fn source_counts(&self) -> &[usize] {
        &self.source_counts
    }

    pub fn has_external(&self) -> bool {
        self.n_external > 0
    }

    pub fn n_external(&self) -> usize {
        self.n_external
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Indices forming the estimation population for a target:
    /// all multi-source rows for internal targets, all rows for external.
    pub fn estimation_indices(&self, target: TargetSpec) -> Vec<usize> {
        match target {
            TargetSpec::Internal { .. } => {
                (0..self.len()).filter(|&i| self.r[i]).collect()
            }
            TargetSpec::External => (0..self.len()).collect(),
        }
    }

    /// Indices of rows belonging to the target population itself
    /// (source s rows for internal, R = 0 rows for external).
    pub fn target_member_indices(&self, target: TargetSpec) -> Vec<usize> {
        match target {
            TargetSpec::Internal { source } => (0..self.len())
                .filter(|&i| self.s[i] == Some(source))
                .collect(),
            TargetSpec::External => (0..self.len()).filter(|&i| !self.r[i]).collect(),
        }
    }

    /// Whether row `i` is a member of the target population.
    #[inline]
    pub fn in_target(&self, i: usize, target: TargetSpec) -> bool {
        match target {
            TargetSpec::Internal { source } => self.s[i] == Some(source),
            TargetSpec::External => !self.r[i],
        }
    }

    /// New dataset holding copies of the given rows (repeats allowed).
    /// Metadata and covariate kinds carry over; counts are recomputed.
    /// Intended for resampling, so the result must re-satisfy the
    /// missingness invariants by construction.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut y = Vec::with_capacity(rows.len());
        let mut a = Vec::with_capacity(rows.len());
        let mut s = Vec::with_capacity(rows.len());
        let mut r = Vec::with_capacity(rows.len());
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut counts = vec![0usize; self.source_labels.len()];
        let mut n_external = 0usize;
        for &i in rows {
            y.push(self.y[i]);
            a.push(self.a[i]);
            s.push(self.s[i]);
            r.push(self.r[i]);
            x.extend_from_slice(self.x(i));
            match self.s[i] {
                Some(si) => counts[si] += 1,
                None => n_external += 1,
            }
        }
        Dataset {
            y,
            a,
            s,
            r,
            x,
            p: self.p,
            covariate_names: self.covariate_names.clone(),
            covariate_kinds: self.covariate_kinds.clone(),
            treatment_labels: self.treatment_labels.clone(),
            source_labels: self.source_labels.clone(),
            source_counts: counts,
            n_external,
            validated: self.validated,
            warnings: Vec::new(),
        }
    }

    pub fn check_target(&self, target: TargetSpec) -> Result<()> {
        match target {
            TargetSpec::Internal { source } => {
                if source >= self.source_labels.len() {
                    return Err(Error::InvalidConfig(format!(
                        "internal target source {source} out of range ({} sources)",
                        self.source_labels.len()
                    )));
                }
            }
            TargetSpec::External => {
                if !self.has_external() {
                    return Err(Error::InvalidConfig(
                        "external target requested but the dataset has no r = 0 records".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Count of target-population rows in each declared subgroup level.
/// Errors with [`Error::ZeroCell`] if any declared level is unobserved.
pub fn subgroup_counts(
    d: &Dataset,
    spec: &SubgroupSpec,
    target: TargetSpec,
) -> Result<Vec<usize>> {
    d.check_target(target)?;
    let mut counts = vec![0usize; spec.levels.len()];
    for i in d.target_member_indices(target) {
        for (k, count) in counts.iter_mut().enumerate() {
            if spec.matches(d, i, k) {
                *count += 1;
            }
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::ZeroCell {
                cell: format!("x~ = ({}) in target {target}", spec.level_label(k)),
            });
        }
    }
    Ok(counts)
}

/// Column-name mapping for CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvColumns {
    pub y: String,
    pub a: String,
    pub s: String,
    pub r: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            y: "y".into(),
            a: "a".into(),
            s: "s".into(),
            r: "r".into(),
        }
    }
}

/// Read a dataset from CSV: one row per observation, columns `y`, `a`, `s`,
/// `r`, then covariates. Empty strings are NA. Treatment and source labels
/// are collected in sorted order of appearance.
pub fn read_csv(path: &Path, columns: &CsvColumns) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("missing required column `{name}`")))
    };
    let yi = find(&columns.y)?;
    let ai = find(&columns.a)?;
    let si = find(&columns.s)?;
    let ri = find(&columns.r)?;
    let special = [yi, ai, si, ri];
    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|j| !special.contains(j))
        .collect();
    let covariate_names: Vec<String> = cov_idx.iter().map(|&j| headers[j].to_string()).collect();

    let mut treatment_set: BTreeSet<String> = BTreeSet::new();
    let mut source_set: BTreeSet<String> = BTreeSet::new();
    let mut raw: Vec<(Option<f64>, Option<String>, Option<String>, bool, Vec<f64>)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let get = |j: usize| record.get(j).unwrap_or("").trim().to_string();
        let opt = |v: String| if v.is_empty() { None } else { Some(v) };
        let y_raw = opt(get(yi));
        let a_raw = opt(get(ai));
        let s_raw = opt(get(si));
        let r_raw = get(ri);
        let r = match r_raw.as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "row {}: r must be 0 or 1, got `{other}`",
                    row_no + 2
                )))
            }
        };
        let y = match y_raw {
            Some(v) => Some(v.parse::<f64>().map_err(|_| Error::InvalidConfig(format!(
                "row {}: cannot parse y value `{v}`",
                row_no + 2
            )))?),
            None => None,
        };
        if let Some(v) = &a_raw {
            treatment_set.insert(v.clone());
        }
        if let Some(v) = &s_raw {
            source_set.insert(v.clone());
        }
        let mut x = Vec::with_capacity(cov_idx.len());
        for &j in &cov_idx {
            let v = get(j);
            let parsed = v.parse::<f64>().map_err(|_| {
                Error::InvalidConfig(format!(
                    "row {}: cannot parse covariate `{}` value `{v}`",
                    row_no + 2,
                    headers[j].to_string()
                ))
            })?;
            x.push(parsed);
        }
        raw.push((y, a_raw, s_raw, r, x));
    }

    let treatment_labels: Vec<String> = treatment_set.into_iter().collect();
    let source_labels: Vec<String> = source_set.into_iter().collect();
    let t_index = |label: &str| treatment_labels.iter().position(|l| l == label).unwrap();
    let s_index = |label: &str| source_labels.iter().position(|l| l == label).unwrap();

    let observations: Vec<Observation> = raw
        .into_iter()
        .map(|(y, a, s, r, x)| Observation {
            y,
            a: a.as_deref().map(t_index),
            s: s.as_deref().map(s_index),
            r,
            x,
        })
        .collect();

    Dataset::new(observations, covariate_names, treatment_labels, source_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs_ms(y: f64, a: usize, s: usize, x: Vec<f64>) -> Observation {
        Observation {
            y: Some(y),
            a: Some(a),
            s: Some(s),
            r: true,
            x,
        }
    }

    fn obs_ext(x: Vec<f64>) -> Observation {
        Observation {
            y: None,
            a: None,
            s: None,
            r: false,
            x,
        }
    }

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn small_dataset() -> Dataset {
        let mut obs = Vec::new();
        for i in 0..10 {
            let xt = if i < 4 { 1.0 } else { 2.0 };
            let s = if i < 6 { 0 } else { 1 };
            obs.push(obs_ms(i as f64, i % 2, s, vec![xt, 0.1 * i as f64]));
        }
        Dataset::new(obs, labels(&["x1", "x2"]), labels(&["0", "1"]), labels(&["1", "2"]))
            .unwrap()
            .validate()
            .unwrap()
    }

    #[test]
    fn external_row_with_outcome_is_mixed_missingness() {
        let obs = vec![
            obs_ms(1.0, 0, 0, vec![1.0]),
            Observation {
                y: Some(2.0),
                a: None,
                s: None,
                r: false,
                x: vec![1.0],
            },
        ];
        let d = Dataset::new(obs, labels(&["x1"]), labels(&["0"]), labels(&["1"])).unwrap();
        match d.validate() {
            Err(Error::MixedMissingness { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected MixedMissingness, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_empty_source() {
        let d = Dataset::new(vec![], labels(&["x1"]), labels(&["0"]), labels(&["1"])).unwrap();
        assert!(matches!(d.validate(), Err(Error::EmptySource { .. })));
    }

    #[test]
    fn three_source_counts() {
        // Shape of the meta-trial example: three sources with fixed sizes.
        let sizes = [485usize, 284, 448];
        let mut obs = Vec::new();
        for (si, &ns) in sizes.iter().enumerate() {
            for k in 0..ns {
                obs.push(obs_ms(k as f64, k % 2, si, vec![(k % 3) as f64]));
            }
        }
        let d = Dataset::new(obs, labels(&["x1"]), labels(&["0", "1"]), labels(&["1", "2", "3"]))
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(d.source_counts(), &[485, 284, 448]);
        assert!(!d.has_external());
    }

    #[test]
    fn validate_is_idempotent() {
        let d = small_dataset();
        let counts = d.source_counts().to_vec();
        let d2 = d.clone().validate().unwrap();
        assert_eq!(d2.source_counts(), counts.as_slice());
        assert_eq!(d2.len(), d.len());
    }

    #[test]
    fn non_finite_covariate_rejected() {
        let obs = vec![obs_ms(1.0, 0, 0, vec![f64::NAN])];
        let d = Dataset::new(obs, labels(&["x1"]), labels(&["0"]), labels(&["1"])).unwrap();
        assert!(matches!(
            d.validate(),
            Err(Error::NonFiniteCovariate { .. })
        ));
    }

    #[test]
    fn subgroup_counts_direct() {
        let d = small_dataset();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![1.0]]);
        let counts =
            subgroup_counts(&d, &spec, TargetSpec::Internal { source: 0 }).unwrap();
        assert_eq!(counts, vec![4]);
    }

    #[test]
    fn subgroup_counts_zero_cell() {
        let d = small_dataset();
        let spec = SubgroupSpec::declared(vec![0], vec![vec![7.0]]);
        let err = subgroup_counts(&d, &spec, TargetSpec::Internal { source: 0 });
        assert!(matches!(err, Err(Error::ZeroCell { .. })));
    }

    #[test]
    fn enumerated_levels_partition_target() {
        let d = small_dataset();
        let target = TargetSpec::Internal { source: 0 };
        let spec = SubgroupSpec::enumerate(&d, vec![0], target).unwrap();
        assert!(spec.exhaustive);
        let counts = subgroup_counts(&d, &spec, target).unwrap();
        let total: usize = counts.iter().sum();
        assert_eq!(total, d.target_member_indices(target).len());
    }

    #[test]
    fn categorical_detection() {
        let d = small_dataset();
        match &d.covariate_kinds()[0] {
            CovariateKind::Categorical { levels } => assert_eq!(levels, &vec![1.0, 2.0]),
            other => panic!("x1 should be categorical, got {other:?}"),
        }
        assert_eq!(d.covariate_kinds()[1], CovariateKind::Continuous);
    }

    #[test]
    fn external_rows_counted() {
        let obs = vec![
            obs_ms(1.0, 0, 0, vec![1.0]),
            obs_ms(2.0, 1, 0, vec![2.0]),
            obs_ext(vec![1.0]),
        ];
        let d = Dataset::new(obs, labels(&["x1"]), labels(&["0", "1"]), labels(&["1"]))
            .unwrap()
            .validate()
            .unwrap();
        assert!(d.has_external());
        assert_eq!(d.n_external(), 1);
        assert_eq!(d.target_member_indices(TargetSpec::External), vec![2]);
        assert_eq!(d.estimation_indices(TargetSpec::Internal { source: 0 }), vec![0, 1]);
        assert_eq!(d.estimation_indices(TargetSpec::External).len(), 3);
    }
}
