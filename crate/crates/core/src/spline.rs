//! Penalized cubic B-spline additive models with GCV smoothing.
//!
//! Each continuous covariate gets a cubic B-spline basis with interior knots
//! at empirical quantiles and a second-divided-difference penalty whose null
//! space is exactly the linear functions, so the fit collapses to ordinary
//! linear least squares as lambda grows. Categorical covariates enter as
//! dummy columns. One coefficient per smooth term is pinned to zero for
//! identifiability against the global intercept.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::{CovariateKind, Dataset};
use crate::error::{Error, Result};

const ORDER: usize = 4; // cubic

#[derive(Debug, Clone, PartialEq)]
pub enum Smoothing {
    /// Per-term lambda chosen by generalized cross-validation on a log grid.
    Gcv,
    /// One fixed lambda shared by all smooth terms.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SplineOptions {
    pub n_interior_knots: usize,
    pub smoothing: Smoothing,
    pub gcv_grid_lo: f64,
    pub gcv_grid_hi: f64,
    pub gcv_grid_points: usize,
    pub gcv_sweeps: usize,
    /// Continuous covariates degrade to linear terms below this row count.
    pub min_rows_per_smooth: usize,
}

impl Default for SplineOptions {
    fn default() -> Self {
        SplineOptions {
            n_interior_knots: 5,
            smoothing: Smoothing::Gcv,
            gcv_grid_lo: 1e-4,
            gcv_grid_hi: 1e4,
            gcv_grid_points: 20,
            gcv_sweeps: 2,
            min_rows_per_smooth: 20,
        }
    }
}

#[derive(Debug, Clone)]
enum Term {
    Smooth {
        col: usize,
        /// Full knot vector with replicated boundaries.
        knots: Vec<f64>,
        n_basis: usize,
        /// First design column of this term; occupies n_basis - 1 columns
        /// (basis function 0 is pinned to zero).
        offset: usize,
    },
    Linear {
        col: usize,
        offset: usize,
    },
    Dummy {
        col: usize,
        /// Non-reference levels, one design column each.
        levels: Vec<f64>,
        offset: usize,
    },
}

/// Fitted additive model: intercept plus one term per covariate.
#[derive(Debug, Clone)]
pub struct AdditiveModel {
    terms: Vec<Term>,
    coef: DVector<f64>,
    n_cols: usize,
}

#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    /// Chosen lambda per smooth term (empty when there are none).
    pub lambdas: Vec<f64>,
    pub edf: f64,
    pub gcv: f64,
    pub rss: f64,
}

/// Design matrix, response, and quadratic penalties of one additive fit;
/// exposed so the penalized objective and its gradient can be checked
/// against finite differences.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// (column offset, penalty block) pairs; blocks are square.
    pub blocks: Vec<(usize, DMatrix<f64>)>,
    pub lambdas: Vec<f64>,
}

impl PenalizedProblem {
    /// ||y - X beta||^2 + sum_t lambda_t beta_t' S_t beta_t
    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        let resid = &self.y - &self.x * beta;
        let mut obj = resid.norm_squared();
        for ((off, s), lam) in self.blocks.iter().zip(self.lambdas.iter()) {
            let b = beta.rows(*off, s.nrows());
            obj += lam * (s * b).dot(&b.clone_owned());
        }
        obj
    }

    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let resid = &self.y - &self.x * beta;
        let mut grad = -2.0 * self.x.transpose() * resid;
        for ((off, s), lam) in self.blocks.iter().zip(self.lambdas.iter()) {
            let b = beta.rows(*off, s.nrows()).clone_owned();
            let sb = s * b;
            for (k, v) in sb.iter().enumerate() {
                grad[*off + k] += 2.0 * lam * v;
            }
        }
        grad
    }
}

pub struct SplineFit {
    pub model: AdditiveModel,
    pub diagnostics: FitDiagnostics,
    pub problem: PenalizedProblem,
}

/// Fit an additive model of `y` on the given covariate columns over `rows`.
pub fn fit_spline_additive(
    d: &Dataset,
    rows: &[usize],
    columns: &[usize],
    y: &[f64],
    opts: &SplineOptions,
) -> Result<SplineFit> {
    assert_eq!(rows.len(), y.len(), "responses must align with rows");
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResponse);
    }
    if rows.is_empty() {
        return Err(Error::RankDeficient {
            detail: "no training rows".into(),
        });
    }

    // Lay out terms. Penalization keeps the fit well posed even when the
    // column count approaches n, so the smooth-term gate is per term.
    let n = rows.len();
    let allow_smooth = n >= opts.min_rows_per_smooth;
    let mut terms = Vec::new();
    let mut offset = 1usize; // column 0 = intercept
    for &col in columns {
        match &d.covariate_kinds()[col] {
            CovariateKind::Continuous => {
                let knots = if allow_smooth {
                    quantile_knots(d, rows, col, opts.n_interior_knots)
                } else {
                    None
                };
                match knots {
                    Some(knots) => {
                        let n_basis = knots.len() - ORDER;
                        terms.push(Term::Smooth {
                            col,
                            knots,
                            n_basis,
                            offset,
                        });
                        offset += n_basis - 1;
                    }
                    None => {
                        terms.push(Term::Linear { col, offset });
                        offset += 1;
                    }
                }
            }
            CovariateKind::Categorical { levels } => {
                let non_ref: Vec<f64> = levels.iter().skip(1).cloned().collect();
                let width = non_ref.len();
                terms.push(Term::Dummy {
                    col,
                    levels: non_ref,
                    offset,
                });
                offset += width;
            }
        }
    }
    let n_cols = offset;

    // Design matrix and penalty blocks.
    let mut x = DMatrix::zeros(n, n_cols);
    for (ri, &i) in rows.iter().enumerate() {
        x[(ri, 0)] = 1.0;
        fill_design_row(&terms, d.x(i), |c, v| x[(ri, c)] = v);
    }
    let mut blocks = Vec::new();
    for term in &terms {
        if let Term::Smooth {
            knots,
            n_basis,
            offset,
            ..
        } = term
        {
            blocks.push((*offset, penalty_block(knots, *n_basis)));
        }
    }

    let yv = DVector::from_column_slice(y);
    let gram = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let yty = yv.norm_squared();

    let n_smooth = blocks.len();
    let lambdas = match (&opts.smoothing, n_smooth) {
        (_, 0) => Vec::new(),
        (Smoothing::Fixed(lam), _) => vec![*lam; n_smooth],
        (Smoothing::Gcv, _) => {
            select_lambdas_gcv(&gram, &xty, yty, n, &blocks, opts)?
        }
    };

    let (beta, edf, rss) = solve_penalized(&gram, &xty, yty, &blocks, &lambdas)?;
    let denom = (n as f64 - edf).max(1e-3);
    let gcv = n as f64 * rss.max(0.0) / (denom * denom);

    let model = AdditiveModel {
        terms,
        coef: beta,
        n_cols,
    };
    Ok(SplineFit {
        model,
        diagnostics: FitDiagnostics {
            lambdas: lambdas.clone(),
            edf,
            gcv,
            rss,
        },
        problem: PenalizedProblem {
            x,
            y: yv,
            blocks,
            lambdas,
        },
    })
}

impl AdditiveModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut value = self.coef[0];
        let coef = &self.coef;
        fill_design_row(&self.terms, x, |c, v| value += coef[c] * v);
        value
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
}

/// Visit the non-intercept design entries for covariates `x`.
fn fill_design_row<F: FnMut(usize, f64)>(terms: &[Term], x: &[f64], mut set: F) {
    for term in terms {
        match term {
            Term::Smooth {
                col,
                knots,
                n_basis,
                offset,
            } => {
                let lo = knots[ORDER - 1];
                let hi = knots[knots.len() - ORDER];
                let xv = x[*col].clamp(lo, hi);
                let (first, vals) = basis_values(knots, *n_basis, xv);
                for (k, v) in vals.iter().enumerate() {
                    let b = first + k;
                    if b == 0 {
                        continue; // pinned coefficient
                    }
                    set(offset + b - 1, *v);
                }
            }
            Term::Linear { col, offset } => set(*offset, x[*col]),
            Term::Dummy {
                col,
                levels,
                offset,
            } => {
                for (k, level) in levels.iter().enumerate() {
                    if x[*col] == *level {
                        set(offset + k, 1.0);
                    }
                }
            }
        }
    }
}

/// Interior knots at empirical quantiles, with replicated boundary knots.
/// Returns None when the column is degenerate (all values equal or too few
/// distinct quantiles), in which case the caller falls back to linear.
fn quantile_knots(d: &Dataset, rows: &[usize], col: usize, n_interior: usize) -> Option<Vec<f64>> {
    let mut values: Vec<f64> = rows.iter().map(|&i| d.x(i)[col]).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let lo = values[0];
    let hi = values[values.len() - 1];
    if !(hi > lo) {
        return None;
    }
    let mut interior = Vec::with_capacity(n_interior);
    for k in 1..=n_interior {
        let q = k as f64 / (n_interior + 1) as f64;
        let pos = q * (values.len() - 1) as f64;
        let idx = pos.floor() as usize;
        let frac = pos - idx as f64;
        let v = if idx + 1 < values.len() {
            values[idx] * (1.0 - frac) + values[idx + 1] * frac
        } else {
            values[idx]
        };
        if v > lo && v < hi && interior.last().map_or(true, |&last| v > last) {
            interior.push(v);
        }
    }
    let mut knots = Vec::with_capacity(interior.len() + 2 * ORDER);
    knots.extend(std::iter::repeat(lo).take(ORDER));
    knots.extend(interior);
    knots.extend(std::iter::repeat(hi).take(ORDER));
    Some(knots)
}

/// Nonzero cubic B-spline basis values at `x`: returns the index of the
/// first nonzero basis function and the ORDER values.
fn basis_values(knots: &[f64], n_basis: usize, x: f64) -> (usize, [f64; ORDER]) {
    // Find span mu with knots[mu] <= x < knots[mu+1].
    let span = {
        let last = n_basis; // knots[n_basis] is the right boundary
        if x >= knots[last] {
            last - 1
        } else {
            let mut lo = ORDER - 1;
            let mut hi = last - 1;
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if knots[mid] <= x {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            lo
        }
    };
    let mut vals = [0.0; ORDER];
    let mut left = [0.0; ORDER];
    let mut right = [0.0; ORDER];
    vals[0] = 1.0;
    for j in 1..ORDER {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    (span + 1 - ORDER, vals)
}

/// Greville abscissae: averages of ORDER-1 consecutive interior knot values.
fn greville(knots: &[f64], n_basis: usize) -> Vec<f64> {
    (0..n_basis)
        .map(|j| knots[j + 1..j + ORDER].iter().sum::<f64>() / (ORDER - 1) as f64)
        .collect()
}

/// Second-divided-difference penalty over the Greville points, restricted to
/// the non-pinned coefficients (basis function 0 fixed at zero). The null
/// space corresponds exactly to functions linear in x.
fn penalty_block(knots: &[f64], n_basis: usize) -> DMatrix<f64> {
    let xi = greville(knots, n_basis);
    let rows = n_basis - 2;
    let mut dmat = DMatrix::zeros(rows, n_basis);
    for j in 0..rows {
        let h1 = xi[j + 1] - xi[j];
        let h2 = xi[j + 2] - xi[j + 1];
        dmat[(j, j)] = 1.0 / h1;
        dmat[(j, j + 1)] = -(1.0 / h1 + 1.0 / h2);
        dmat[(j, j + 2)] = 1.0 / h2;
    }
    let full = dmat.transpose() * dmat; // n_basis x n_basis
    // Drop the pinned coefficient's row and column.
    let m = n_basis - 1;
    let mut s = DMatrix::from_fn(m, m, |i, j| full[(i + 1, j + 1)]);
    // Normalize so the smallest nonzero eigenvalue is 1: lambda then acts on
    // a common scale across terms, and a fixed lambda of 1e8 drives the fit
    // into the penalty null space (the linear functions) to high precision.
    let eigen = s.clone().symmetric_eigen();
    let max_ev = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min_nonzero = eigen
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&v| v > 1e-10 * max_ev)
        .fold(f64::INFINITY, f64::min);
    if min_nonzero.is_finite() && min_nonzero > 0.0 {
        s /= min_nonzero;
    }
    s
}

/// Solve (G + sum lambda_t S_t + jitter) beta = X'y; returns (beta, edf, rss).
fn solve_penalized(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    yty: f64,
    blocks: &[(usize, DMatrix<f64>)],
    lambdas: &[f64],
) -> Result<(DVector<f64>, f64, f64)> {
    let d = gram.nrows();
    let mut a = gram.clone();
    for ((off, s), lam) in blocks.iter().zip(lambdas.iter()) {
        let m = s.nrows();
        for i in 0..m {
            for j in 0..m {
                a[(off + i, off + j)] += lam * s[(i, j)];
            }
        }
    }
    // Tiny jitter keeps zero-variance dummy columns from blocking the solve;
    // scaled by the data Gram so large penalties do not inflate it.
    let jitter = 1e-10 * (gram.trace() / d as f64).max(1.0);
    for i in 0..d {
        a[(i, i)] += jitter;
    }
    let chol = Cholesky::new(a).ok_or_else(|| Error::RankDeficient {
        detail: "penalized normal equations not positive definite".into(),
    })?;
    let beta = chol.solve(xty);
    let a_inv = chol.inverse();
    let mut edf = 0.0;
    for i in 0..d {
        for j in 0..d {
            edf += a_inv[(i, j)] * gram[(j, i)];
        }
    }
    let rss = yty - 2.0 * beta.dot(xty) + beta.dot(&(gram * &beta));
    Ok((beta, edf, rss))
}

/// Coordinate-descent GCV: each smooth term's lambda is optimized on the
/// log grid holding the others fixed.
fn select_lambdas_gcv(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    yty: f64,
    n: usize,
    blocks: &[(usize, DMatrix<f64>)],
    opts: &SplineOptions,
) -> Result<Vec<f64>> {
    let grid: Vec<f64> = (0..opts.gcv_grid_points)
        .map(|k| {
            let t = k as f64 / (opts.gcv_grid_points - 1) as f64;
            (opts.gcv_grid_lo.ln() + t * (opts.gcv_grid_hi.ln() - opts.gcv_grid_lo.ln())).exp()
        })
        .collect();
    let mut lambdas = vec![1.0; blocks.len()];
    let gcv_of = |lams: &[f64]| -> Result<f64> {
        let (_, edf, rss) = solve_penalized(gram, xty, yty, blocks, lams)?;
        let denom = (n as f64 - edf).max(1e-3);
        Ok(n as f64 * rss.max(0.0) / (denom * denom))
    };
    for _ in 0..opts.gcv_sweeps {
        for t in 0..blocks.len() {
            let mut best = (lambdas[t], gcv_of(&lambdas)?);
            for &cand in &grid {
                let mut trial = lambdas.clone();
                trial[t] = cand;
                let score = gcv_of(&trial)?;
                if score < best.1 {
                    best = (cand, score);
                }
            }
            lambdas[t] = best.0;
        }
    }
    Ok(lambdas)
}
