//! Design-matrix expansion shared by the nuisance fitters: intercept,
//! linear columns for continuous covariates, dummy columns for categorical
//! covariates (reference = first level).

use nalgebra::DMatrix;

use crate::data::{CovariateKind, Dataset};

#[derive(Debug, Clone, PartialEq)]
pub enum ExpansionTerm {
    Intercept,
    Linear { col: usize },
    /// Indicator of covariate `col` equal to `level`.
    Dummy { col: usize, level: f64 },
}

/// A frozen mapping from raw covariate vectors to model design rows, so a
/// fitted model can predict on new data with the same layout.
#[derive(Debug, Clone)]
pub struct Expansion {
    terms: Vec<ExpansionTerm>,
}

impl Expansion {
    /// Build an expansion over the given covariate columns using the
    /// dataset's covariate kinds.
    pub fn from_dataset(d: &Dataset, columns: &[usize]) -> Self {
        let mut terms = vec![ExpansionTerm::Intercept];
        for &col in columns {
            match &d.covariate_kinds()[col] {
                CovariateKind::Continuous => terms.push(ExpansionTerm::Linear { col }),
                CovariateKind::Categorical { levels } => {
                    for &level in levels.iter().skip(1) {
                        terms.push(ExpansionTerm::Dummy { col, level });
                    }
                }
            }
        }
        Expansion { terms }
    }

    /// Expansion with explicit terms (used by tests and synthetic fits).
    pub fn linear(columns: &[usize]) -> Self {
        let mut terms = vec![ExpansionTerm::Intercept];
        for &col in columns {
            terms.push(ExpansionTerm::Linear { col });
        }
        Expansion { terms }
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[ExpansionTerm] {
        &self.terms
    }

    /// Fill `out` (length `width()`) with the design row for covariates `x`.
    #[inline]
    pub fn fill_row(&self, x: &[f64], out: &mut [f64]) {
        for (slot, term) in out.iter_mut().zip(self.terms.iter()) {
            *slot = match term {
                ExpansionTerm::Intercept => 1.0,
                ExpansionTerm::Linear { col } => x[*col],
                ExpansionTerm::Dummy { col, level } => {
                    if x[*col] == *level {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }

    pub fn row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.fill_row(x, &mut out);
        out
    }

    /// Dense design matrix for the given dataset rows.
    pub fn matrix(&self, d: &Dataset, rows: &[usize]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), self.width());
        let mut buf = vec![0.0; self.width()];
        for (ri, &i) in rows.iter().enumerate() {
            self.fill_row(d.x(i), &mut buf);
            for (ci, &v) in buf.iter().enumerate() {
                m[(ri, ci)] = v;
            }
        }
        m
    }

    /// Human-readable column names for coefficient export.
    pub fn column_names(&self, covariate_names: &[String]) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| match t {
                ExpansionTerm::Intercept => "(intercept)".to_string(),
                ExpansionTerm::Linear { col } => covariate_names[*col].clone(),
                ExpansionTerm::Dummy { col, level } => {
                    format!("{}=={level}", covariate_names[*col])
                }
            })
            .collect()
    }
}
